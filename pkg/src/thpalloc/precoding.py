"""Interference-eliminating structures on a single subcarrier.

Null-space bases protect already-placed users from later transmissions;
the block-triangular feedback matrix plus the modulo recursion remove
the interference caused by earlier-placed users at the transmitter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-12


class RankDeficientError(Exception):
    """A matrix that must have full rank does not."""


@dataclass(frozen=True)
class NullSpaceBasis:
    """Orthonormal basis of the null space of a stack of user channels."""

    v0: np.ndarray              # (N_T, m)
    rank_deficient: bool = False


@dataclass(frozen=True)
class EffectiveChannel:
    """Projected channel H' = H V0 with its SVD factors."""

    hp: np.ndarray              # (N_R, m)
    left: np.ndarray            # Omega, (N_R, r)
    singular_values: np.ndarray  # descending, length r
    right: np.ndarray           # V1, (m, r)
    scale: float = 0.0          # norm of the unprojected channel

    def rank(self, tol_factor: float = RANK_TOL) -> int:
        s = self.singular_values
        if s.size == 0:
            return 0
        # judge against the unprojected channel too, so a channel the
        # projection annihilates reads as rank zero rather than as a
        # full-rank matrix of rounding noise
        ref = max(float(s[0]), self.scale)
        if ref == 0.0:
            return 0
        return int(np.count_nonzero(s > tol_factor * ref))


def _fix_column_phases(v: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    out = v.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        pivot = out[i, j]
        if np.abs(pivot) > 0:
            out[:, j] *= np.conj(pivot) / np.abs(pivot)
    return out


def null_space_basis(stacked: np.ndarray, tx_antennas: int) -> NullSpaceBasis:
    """Basis of the null space of the stacked channels of placed users.

    For an empty stack (first position on the subcarrier) returns the
    identity. A rank-deficient stack widens the basis and sets a flag.
    """
    if stacked.size == 0:
        return NullSpaceBasis(v0=np.eye(tx_antennas, dtype=complex))
    rows = stacked.shape[0]
    if rows >= tx_antennas:
        raise ValueError("stacked channel leaves no transmit null space")
    _, s, vh = np.linalg.svd(stacked, full_matrices=True)
    rank = int(np.count_nonzero(s > RANK_TOL * s[0])) if s[0] > 0 else 0
    v0 = vh[rank:].conj().T
    return NullSpaceBasis(v0=_fix_column_phases(v0), rank_deficient=rank < rows)


def effective_channel(h: np.ndarray, basis: NullSpaceBasis) -> EffectiveChannel:
    """Project the user channel onto the null space and factor it."""
    hp = h @ basis.v0
    left, s, vh = np.linalg.svd(hp, full_matrices=False)
    return EffectiveChannel(hp=hp, left=left, singular_values=s,
                            right=vh.conj().T, scale=float(np.linalg.norm(h)))


def feedback_matrix(t_blocks: list[list[np.ndarray | None]],
                    streams: int) -> np.ndarray:
    """THP feedback matrix B from the lower-triangular block family T.

    t_blocks[k][i] (k >= i) is the coupling of transmission i into
    receiver k. Off-diagonal blocks of the unit-diagonal factor are
    pinv(T_kk) @ T_ki; the pseudo-inverse covers diagonal blocks that
    are tall (N_R > L), whose Gram matrix is singular. Returns B = C - I
    with C the unit-diagonal lower-triangular factor.
    """
    q = len(t_blocks)
    c = np.eye(q * streams, dtype=complex)
    for k in range(q):
        t_kk = t_blocks[k][k]
        s = np.linalg.svd(t_kk, compute_uv=False)
        if s.size < streams or s[-1] <= RANK_TOL * s[0]:
            raise RankDeficientError(
                f"diagonal block for position {k} is rank deficient")
        pinv = np.linalg.pinv(t_kk, rcond=RANK_TOL)
        for i in range(k):
            c[k * streams:(k + 1) * streams, i * streams:(i + 1) * streams] = \
                pinv @ t_blocks[k][i]
    return c - np.eye(q * streams)


def modulo(x: np.ndarray | complex, constellation_size: int):
    """Fold complex values into the square (-sqrt(M), sqrt(M)] per axis.

    Returns (y, shift) with y = x + shift and shift = 2*sqrt(M)*xi for
    a unique Gaussian integer xi.
    """
    root_m = np.sqrt(constellation_size)
    x = np.asarray(x, dtype=complex)
    xi = (np.floor((root_m - x.real) / (2 * root_m))
          + 1j * np.floor((root_m - x.imag) / (2 * root_m)))
    shift = 2 * root_m * xi
    return x + shift, shift


def thp_precode(d: np.ndarray, b_matrix: np.ndarray, streams: int,
                constellation_size: int):
    """Run the modulo-feedback recursion over the stacked data vector.

    d has shape (Q*L,) or (Q*L, S) for S symbol instants. Returns
    (b, v) with v = d + shift and C b = v exactly, C = B + I.
    """
    d = np.asarray(d, dtype=complex)
    squeeze = d.ndim == 1
    if squeeze:
        d = d[:, None]
    q = d.shape[0] // streams
    b = np.empty_like(d)
    v = np.empty_like(d)
    for i in range(q):
        rows = slice(i * streams, (i + 1) * streams)
        acc = d[rows].copy()
        for j in range(i):
            cols = slice(j * streams, (j + 1) * streams)
            acc -= b_matrix[rows, cols] @ b[cols]
        b[rows], shift = modulo(acc, constellation_size)
        v[rows] = d[rows] + shift
    if squeeze:
        return b[:, 0], v[:, 0]
    return b, v
