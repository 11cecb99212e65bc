import numpy as np
import pytest

from thpalloc.precoding import (RankDeficientError, effective_channel,
                                feedback_matrix, modulo, null_space_basis,
                                thp_precode)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestNullSpaceBasis:
    def test_axis_aligned(self):
        basis = null_space_basis(np.array([[1.0, 0.0]]), 2)
        assert basis.v0.shape == (2, 1)
        assert abs(basis.v0[0, 0]) < 1e-12
        assert basis.v0[1, 0] == pytest.approx(1.0)  # phase fixed positive
        assert not basis.rank_deficient

    def test_empty_stack_identity(self):
        basis = null_space_basis(np.empty((0, 4)), 4)
        np.testing.assert_array_equal(basis.v0, np.eye(4))

    def test_random_stack_residual(self):
        rng = np.random.default_rng(0)
        stacked = random_complex(rng, (4, 8))
        basis = null_space_basis(stacked, 8)
        assert basis.v0.shape == (8, 4)
        assert np.linalg.norm(stacked @ basis.v0) < 1e-10
        np.testing.assert_allclose(basis.v0.conj().T @ basis.v0, np.eye(4),
                                   atol=1e-10)

    def test_rank_deficient_widens_and_flags(self):
        row = np.array([[1.0, 2.0, 0.0, 1.0]])
        stacked = np.vstack([row, 2 * row])
        basis = null_space_basis(stacked, 4)
        assert basis.rank_deficient
        assert basis.v0.shape == (4, 3)
        assert np.linalg.norm(stacked @ basis.v0) < 1e-10

    def test_no_null_space_left(self):
        with pytest.raises(ValueError, match="null space"):
            null_space_basis(np.eye(3), 3)

    def test_deterministic_phase(self):
        rng = np.random.default_rng(1)
        stacked = random_complex(rng, (2, 4))
        a = null_space_basis(stacked, 4)
        b = null_space_basis(stacked.copy(), 4)
        np.testing.assert_array_equal(a.v0, b.v0)
        for j in range(a.v0.shape[1]):
            pivot = a.v0[np.argmax(np.abs(a.v0[:, j])), j]
            assert pivot.imag == pytest.approx(0.0, abs=1e-12)
            assert pivot.real > 0


class TestEffectiveChannel:
    def test_identity_projection(self):
        rng = np.random.default_rng(2)
        h = random_complex(rng, (2, 4))
        eff = effective_channel(h, null_space_basis(np.empty((0, 4)), 4))
        np.testing.assert_array_equal(eff.hp, h)

    def test_scalar_product(self):
        basis = null_space_basis(np.array([[1.0, 0.0]]), 2)
        eff = effective_channel(np.array([[1.0, 1.0]]), basis)
        assert eff.hp.shape == (1, 1)
        assert abs(eff.hp[0, 0]) == pytest.approx(1.0)
        assert eff.singular_values[0] == pytest.approx(1.0)

    def test_svd_reconstruction(self):
        rng = np.random.default_rng(3)
        stacked = random_complex(rng, (2, 4))
        h = random_complex(rng, (2, 4))
        eff = effective_channel(h, null_space_basis(stacked, 4))
        rebuilt = eff.left @ np.diag(eff.singular_values) @ eff.right.conj().T
        assert np.linalg.norm(rebuilt - eff.hp) < 1e-9 * np.linalg.norm(eff.hp)
        assert np.all(np.diff(eff.singular_values) <= 1e-12)

    def test_rank_detection(self):
        basis = null_space_basis(np.empty((0, 4)), 4)
        eff = effective_channel(np.zeros((2, 4)), basis)
        assert eff.rank() == 0
        rng = np.random.default_rng(4)
        eff2 = effective_channel(random_complex(rng, (2, 4)), basis)
        assert eff2.rank() == 2


class TestFeedbackMatrix:
    def test_scalar_hand_example(self):
        t = [[np.array([[2.0]]), None],
             [np.array([[1.0]]), np.array([[3.0]])]]
        b = feedback_matrix(t, 1)
        c = b + np.eye(2)
        assert b[1, 0] == pytest.approx(1.0 / 3.0)
        d = np.diag([2.0, 3.0])
        t_full = np.array([[2.0, 0.0], [1.0, 3.0]])
        np.testing.assert_allclose(d @ c, t_full, rtol=1e-12)

    def test_no_coupling(self):
        rng = np.random.default_rng(5)
        t = [[random_complex(rng, (2, 2)), None],
             [np.zeros((2, 2)), random_complex(rng, (2, 2))]]
        b = feedback_matrix(t, 2)
        assert np.linalg.norm(b) == pytest.approx(0.0, abs=1e-12)

    def test_random_blocks_factorization(self):
        # D C = T with D the block-diagonal of T, tall diagonal blocks
        rng = np.random.default_rng(6)
        q, n_r, ell = 2, 2, 2
        t = [[random_complex(rng, (n_r, ell)) if i <= k else None
              for i in range(q)] for k in range(q)]
        b = feedback_matrix(t, ell)
        c = b + np.eye(q * ell)
        t_full = np.block([[t[k][i] if i <= k else np.zeros((n_r, ell))
                            for i in range(q)] for k in range(q)])
        d_full = np.block([[t[k][k] if i == k else np.zeros((n_r, ell))
                            for i in range(q)] for k in range(q)])
        resid = np.linalg.norm(d_full @ c - t_full)
        assert resid < 1e-9 * np.linalg.norm(t_full)

    def test_strictly_block_lower_triangular(self):
        rng = np.random.default_rng(7)
        q, ell = 3, 2
        t = [[random_complex(rng, (2, 2)) if i <= k else None
              for i in range(q)] for k in range(q)]
        b = feedback_matrix(t, ell)
        for k in range(q):
            for i in range(k, q):
                block = b[k * ell:(k + 1) * ell, i * ell:(i + 1) * ell]
                assert np.linalg.norm(block) < 1e-12

    def test_rank_deficient_diagonal_raises(self):
        t = [[np.zeros((2, 2)), None],
             [np.eye(2), np.eye(2)]]
        with pytest.raises(RankDeficientError, match="position 0"):
            feedback_matrix(t, 2)


class TestModulo:
    def test_mod16_positive(self):
        y, shift = modulo(5 + 0j, 16)
        assert y == pytest.approx(-3 + 0j)
        assert shift == pytest.approx(-8 + 0j)

    def test_mod16_open_left_boundary(self):
        y, shift = modulo(-4 + 0j, 16)
        assert y == pytest.approx(4 + 0j)
        assert shift == pytest.approx(8 + 0j)

    def test_mod4_both_axes(self):
        y, shift = modulo(-2 - 2j, 4)
        assert y == pytest.approx(2 + 2j)
        assert shift == pytest.approx(4 + 4j)

    def test_region_and_integer_shift(self):
        rng = np.random.default_rng(8)
        x = 20 * (rng.standard_normal(1000) + 1j * rng.standard_normal(1000))
        for m in (4, 16, 64):
            y, shift = modulo(x, m)
            root = np.sqrt(m)
            assert np.all(y.real > -root) and np.all(y.real <= root)
            assert np.all(y.imag > -root) and np.all(y.imag <= root)
            xi = shift / (2 * root)
            np.testing.assert_allclose(xi.real, np.round(xi.real), atol=1e-9)
            np.testing.assert_allclose(xi.imag, np.round(xi.imag), atol=1e-9)
            np.testing.assert_allclose(x + shift, y, atol=1e-9)


class TestThpPrecode:
    def test_no_feedback(self):
        d = np.array([1 + 1j, -1 - 1j])
        b, v = thp_precode(d, np.zeros((2, 2)), 1, 4)
        np.testing.assert_array_equal(b, d)
        np.testing.assert_array_equal(v, d)

    def test_hand_recursion_in_region(self):
        b_matrix = np.array([[0.0, 0.0], [0.5, 0.0]])
        d = np.array([1 + 1j, 1 + 1j])
        b, v = thp_precode(d, b_matrix, 1, 4)
        np.testing.assert_allclose(b, [1 + 1j, 0.5 + 0.5j])
        np.testing.assert_allclose(v, d)  # no fold

    def test_hand_recursion_folded(self):
        b_matrix = np.array([[0.0, 0.0], [3.0, 0.0]])
        d = np.array([1 + 1j, 1 + 1j])
        b, v = thp_precode(d, b_matrix, 1, 4)
        assert b[1] == pytest.approx(2 + 2j)
        assert v[1] == pytest.approx(d[1] + (4 + 4j))

    def test_triangular_identity_exact(self):
        rng = np.random.default_rng(9)
        q, ell = 3, 2
        b_matrix = np.zeros((q * ell, q * ell), dtype=complex)
        for k in range(1, q):
            for i in range(k):
                b_matrix[k * ell:(k + 1) * ell, i * ell:(i + 1) * ell] = \
                    random_complex(rng, (ell, ell))
        d = random_complex(rng, (q * ell, 50)) * 4
        b, v = thp_precode(d, b_matrix, ell, 16)
        c = b_matrix + np.eye(q * ell)
        np.testing.assert_allclose(c @ b, v, atol=1e-12)
        root = 4.0
        assert np.all(b.real > -root) and np.all(b.real <= root)
        assert np.all(b.imag > -root) and np.all(b.imag <= root)

    def test_vector_and_matrix_paths_agree(self):
        rng = np.random.default_rng(10)
        b_matrix = np.zeros((2, 2), dtype=complex)
        b_matrix[1, 0] = 0.7 - 0.2j
        d = random_complex(rng, (2, 5))
        b_mat, v_mat = thp_precode(d, b_matrix, 1, 16)
        for s in range(5):
            b_vec, v_vec = thp_precode(d[:, s], b_matrix, 1, 16)
            np.testing.assert_allclose(b_vec, b_mat[:, s], atol=1e-14)
            np.testing.assert_allclose(v_vec, v_mat[:, s], atol=1e-14)
