import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svdcluster.linalg import (
    LinalgError,
    SVDConvergenceError,
    Tolerances,
    exact_trunc_error,
    frobenius_sq,
    orthonormal_basis,
    project_residual,
    sym_eig_desc,
    thin_svd,
)

from conftest import oracle_sv


class TestThinSvd:
    def test_identity(self):
        _, S, _ = thin_svd(np.eye(3))
        np.testing.assert_allclose(S, [1, 1, 1])

    def test_rank_one(self, rng):
        u = rng.standard_normal(6)
        v = rng.standard_normal(4)
        M = 5 * np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))
        _, S, _ = thin_svd(M)
        np.testing.assert_allclose(S, [5, 0, 0, 0], atol=1e-12)

    @pytest.mark.parametrize("shape", [(8, 5), (5, 8), (7, 1)])
    def test_reconstruction(self, rng, shape):
        M = rng.standard_normal(shape)
        U, S, V = thin_svd(M)
        k = min(shape)
        assert U.shape == (shape[0], k) and V.shape == (shape[1], k)
        assert np.linalg.norm(U @ np.diag(S) @ V.T - M) < 1e-10 * np.linalg.norm(M)
        np.testing.assert_allclose(U.T @ U, np.eye(k), atol=1e-12)
        np.testing.assert_allclose(V.T @ V, np.eye(k), atol=1e-12)
        assert np.all(np.diff(S) <= 0)

    def test_needs_columns(self):
        with pytest.raises(ValueError):
            thin_svd(np.zeros((3, 0)))

    def test_convergence_error_carries_dims(self):
        err = SVDConvergenceError(4, 7)
        assert (err.rows, err.cols) == (4, 7)
        assert "4x7" in str(err)


class TestSymEig:
    def test_diagonal(self):
        lam, V = sym_eig_desc(np.diag([1.0, 4.0]))
        np.testing.assert_allclose(lam, [4, 1])
        np.testing.assert_allclose(np.abs(V), [[0, 1], [1, 0]], atol=1e-15)

    def test_construct_then_recover(self, rng):
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        S = Q @ np.diag([9.0, 4.0, 1.0]) @ Q.T
        lam, V = sym_eig_desc(S)
        np.testing.assert_allclose(lam, [9, 4, 1], rtol=1e-12)
        np.testing.assert_allclose(V.T @ V, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(V @ np.diag(lam) @ V.T, S, atol=1e-12)

    def test_zero(self):
        lam, _ = sym_eig_desc(np.zeros((2, 2)))
        np.testing.assert_array_equal(lam, [0, 0])

    def test_tiny_negative_clamped(self):
        lam, _ = sym_eig_desc(np.diag([1.0, -1e-14]))
        np.testing.assert_array_equal(lam, [1.0, 0.0])

    def test_negative_rejected(self):
        with pytest.raises(LinalgError):
            sym_eig_desc(np.diag([1.0, -1e-3]))

    def test_asymmetric_rejected(self):
        with pytest.raises(LinalgError):
            sym_eig_desc(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestOrthonormalBasis:
    def test_zero_matrix(self):
        assert orthonormal_basis(np.zeros((4, 2))).shape == (4, 0)

    def test_duplicated_column(self):
        e1 = np.array([1.0, 0, 0, 0])
        Q = orthonormal_basis(np.column_stack([e1, e1]))
        assert Q.shape == (4, 1)
        np.testing.assert_allclose(np.abs(Q[:, 0]), e1, atol=1e-15)

    def test_rank_by_construction(self, rng):
        M = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 4))
        Q = orthonormal_basis(M)
        assert Q.shape == (6, 2)
        assert np.abs(Q.T @ Q - np.eye(2)).max() <= 1e-12
        # spans range(M)
        assert np.linalg.norm(M - Q @ (Q.T @ M)) < 1e-12 * np.linalg.norm(M)

    def test_explicit_scale_drops_noise(self, rng):
        noise = 1e-17 * rng.standard_normal((5, 3))
        assert orthonormal_basis(noise).shape[1] == 3
        assert orthonormal_basis(noise, scale=1.0).shape[1] == 0

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), m=st.integers(1, 12), n=st.integers(1, 12), k=st.integers(0, 12))
    def test_always_orthonormal(self, seed, m, n, k):
        rng = np.random.default_rng(seed)
        k = min(k, m, n)
        M = rng.standard_normal((m, k)) @ rng.standard_normal((k, n))
        Q = orthonormal_basis(M)
        assert Q.shape[1] == k
        assert np.abs(Q.T @ Q - np.eye(Q.shape[1])).max(initial=0.0) <= 1e-12


class TestProjectResidual:
    def test_contained_range(self, rng):
        A = rng.standard_normal((8, 3))
        Q, _ = np.linalg.qr(A)
        assert np.linalg.norm(project_residual(Q, A)) <= 1e-10 * np.linalg.norm(A)

    def test_orthogonal_input(self):
        Q = np.eye(4)[:, :1]
        A = np.outer(np.eye(4)[1], [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(project_residual(Q, A), A)

    def test_empty_basis(self, rng):
        A = rng.standard_normal((5, 2))
        np.testing.assert_array_equal(project_residual(np.zeros((5, 0)), A), A)

    def test_pythagoras(self, rng):
        Q, _ = np.linalg.qr(rng.standard_normal((8, 3)))
        A = rng.standard_normal((8, 4))
        R = project_residual(Q, A)
        lhs = np.sum(A * A)
        P = Q @ (Q.T @ A)
        assert abs(lhs - np.sum(P * P) - np.sum(R * R)) <= 1e-9 * lhs
        assert np.abs(Q.T @ R).max() <= 1e-10 * np.linalg.norm(A)

    def test_row_mismatch(self):
        with pytest.raises(ValueError, match="row mismatch"):
            project_residual(np.zeros((3, 1)), np.zeros((4, 1)))


class TestNorms:
    def test_frobenius(self):
        assert frobenius_sq(np.eye(3)) == 3
        assert frobenius_sq(np.zeros((2, 3))) == 0
        assert frobenius_sq(np.array([[1.0, 2.0], [3.0, 4.0]])) == 30

    def test_trunc_error_cases(self, rng):
        M = rng.standard_normal((5, 3))
        assert exact_trunc_error(M, 3) == 0
        assert exact_trunc_error(M, 7) == 0
        assert exact_trunc_error(M, 0) == pytest.approx(np.linalg.norm(M), rel=1e-12)
        assert exact_trunc_error(np.diag([3.0, 2.0, 1.0]), 1) == pytest.approx(np.sqrt(5), rel=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), m=st.integers(1, 10), n=st.integers(1, 10), r=st.integers(0, 11))
    def test_energy_split(self, seed, m, n, r):
        M = np.random.default_rng(seed).standard_normal((m, n))
        s = oracle_sv(M)
        total = frobenius_sq(M)
        assert abs(exact_trunc_error(M, r) ** 2 + np.sum(s[:r] ** 2) - total) <= 1e-9 * total

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), m=st.integers(1, 10), n=st.integers(1, 8), k=st.integers(1, 8))
    def test_weyl_monotonicity(self, seed, m, n, k):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((m, n))
        B = rng.standard_normal((m, k))
        s_m = oracle_sv(M)
        s_mb = oracle_sv(np.hstack([M, B]))
        assert np.all(s_mb[: len(s_m)] >= s_m - 1e-10 * s_mb[0])


def test_tolerances_validated():
    with pytest.raises(ValueError):
        Tolerances(rank_tol_factor=0)
    with pytest.raises(ValueError):
        Tolerances(rank_tol_factor=1.0)
    with pytest.raises(ValueError):
        Tolerances(eig_clamp=1e-2)
