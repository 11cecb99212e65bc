"""Minimum-power transceiver design under a sum-MSE budget.

For the decoupled link y = H' U v + w with a zero-forcing receiver,
the minimum tr(U^H U) subject to sum_l MSE(l) <= gamma/n has the
closed form U = V1 diag(lambda_U)^(1/2) S^H with

    lambda_U(l) = sqrt(nu * sigma^2 / lambda_H'(l)),
    sqrt(nu)    = sqrt(sigma^2) * (n/gamma) * sum_l lambda_H'(l)^(-1/2),

obtained by substituting the water-filling form into the active
constraint. The constant-modulus unitary S (unitary DFT) equalizes the
per-stream MSEs at gamma/(n*L).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import dft

from thpalloc.precoding import (RANK_TOL, EffectiveChannel, NullSpaceBasis,
                                effective_channel, null_space_basis)

INFEASIBLE_COST = math.inf


@dataclass(frozen=True)
class PowerLoading:
    """Diagonal power allocation meeting the MSE budget with equality."""

    lambda_u: np.ndarray   # length L, positive
    nu: float
    cost: float            # sum(lambda_u) = tr(U^H U)
    per_stream_mse: float  # epsilon = gamma/(n*L)


def equalizing_rotation(streams: int) -> np.ndarray:
    """Unitary DFT matrix; |S_ij| = 1/sqrt(L) equalizes per-stream MSEs."""
    return dft(streams, scale="sqrtn")


def power_loading(lambda_hp: np.ndarray, gamma_k: float, n_k: int,
                  noise_variance: float) -> PowerLoading:
    """Closed-form water-filling diagonal for one (subcarrier, user) pair."""
    lam = np.asarray(lambda_hp, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("effective channel gains must be positive")
    streams = lam.size
    per_sc = gamma_k / n_k
    inv_root = np.sum(lam ** -0.5)
    sqrt_nu = math.sqrt(noise_variance) * inv_root / per_sc
    lambda_u = sqrt_nu * np.sqrt(noise_variance / lam)
    return PowerLoading(lambda_u=lambda_u, nu=sqrt_nu ** 2,
                        cost=float(np.sum(lambda_u)),
                        per_stream_mse=per_sc / streams)


def loading_cost(lambda_hp: np.ndarray, gamma_k: float, n_k: int,
                 noise_variance: float) -> float:
    """Transmit power sum(lambda_U) without building the full loading."""
    lam = np.asarray(lambda_hp, dtype=float)
    return noise_variance * (n_k / gamma_k) * float(np.sum(lam ** -0.5)) ** 2


def transmit_matrix(v1: np.ndarray, loading: PowerLoading,
                    rotation: np.ndarray) -> np.ndarray:
    """U = V1 diag(lambda_U)^(1/2) S^H."""
    return (v1 * np.sqrt(loading.lambda_u)) @ rotation.conj().T


def receiver_matrix(hp: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Minimum-norm zero-forcing receiver: G H' U = I."""
    hu = hp @ u
    gram = hu.conj().T @ hu
    try:
        g = np.linalg.solve(gram, hu.conj().T)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("H'U Gram matrix is singular") from exc
    return g


def effective_gains(eff: EffectiveChannel, streams: int) -> np.ndarray | None:
    """Top-L squared singular values of H', or None if rank < L."""
    if eff.rank() < streams:
        return None
    return eff.singular_values[:streams] ** 2


def subcarrier_cost(channels, placed_users: list[int], n: int, k: int,
                    gamma_k: float, n_k: int, noise_variance: float,
                    streams: int) -> float:
    """Power cost of giving subcarrier n to user k, given the users
    already placed on n by earlier groups. Infinite when the projected
    channel cannot carry L streams."""
    h_all = channels.matrices[n]
    stack = (np.vstack([h_all[i] for i in placed_users])
             if placed_users else np.empty((0, h_all.shape[2])))
    basis = null_space_basis(stack, h_all.shape[2])
    eff = effective_channel(h_all[k], basis)
    lam = effective_gains(eff, streams)
    if lam is None:
        return INFEASIBLE_COST
    return loading_cost(lam, gamma_k, n_k, noise_variance)


def bisect_nu(lambda_hp: np.ndarray, gamma_k: float, n_k: int,
              noise_variance: float, tol: float = 1e-14) -> float:
    """Root-find nu on the active MSE constraint; cross-checks the
    closed form in tests."""
    lam = np.asarray(lambda_hp, dtype=float)
    target = gamma_k / n_k

    def mse_sum(nu):
        lam_u = np.sqrt(nu * noise_variance / lam)
        return float(np.sum(noise_variance / (lam_u * lam)))

    lo, hi = 1e-30, 1.0
    while mse_sum(hi) > target:
        hi *= 4.0
    while mse_sum(lo) < target:
        lo /= 4.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if mse_sum(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < tol:
            break
    return math.sqrt(lo * hi)


__all__ = [
    "INFEASIBLE_COST",
    "PowerLoading",
    "equalizing_rotation",
    "power_loading",
    "loading_cost",
    "transmit_matrix",
    "receiver_matrix",
    "effective_gains",
    "subcarrier_cost",
    "bisect_nu",
    "null_space_basis",
    "effective_channel",
    "NullSpaceBasis",
    "EffectiveChannel",
    "RANK_TOL",
]
