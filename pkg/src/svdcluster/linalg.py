"""Dense real linear-algebra primitives with explicit tolerances.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in Fortran
(column-major) order, so horizontal concatenation appends contiguous memory.
Spectra are 1-D non-increasing, non-negative float64 arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels

EPS = float(np.finfo(np.float64).eps)


class LinalgError(ArithmeticError):
    """Raised when a factorization fails or an input violates a numerical precondition."""


class SVDConvergenceError(LinalgError):
    def __init__(self, rows: int, cols: int):
        super().__init__(f"SVD did not converge for a {rows}x{cols} matrix")
        self.rows = rows
        self.cols = cols


@dataclass(frozen=True)
class Tolerances:
    """Numerical knobs for rank decisions and eigenvalue clamping.

    ``rank_tol_factor`` (already in units of machine epsilon: default
    ``100 * eps``) multiplies ``max(rows, cols) * scale``; ``eig_clamp`` is
    relative to the largest eigenvalue.
    """

    rank_tol_factor: float = 1e2 * EPS
    eig_clamp: float = 1e-12

    def __post_init__(self):
        for name in ("rank_tol_factor", "eig_clamp"):
            v = getattr(self, name)
            if not (0 < v < 1e-3):
                raise ValueError(f"{name} must lie in (0, 1e-3), got {v}")

    def rank_threshold(self, shape: tuple[int, int], scale: float) -> float:
        return self.rank_tol_factor * max(shape) * scale


DEFAULT_TOL = Tolerances()


def as_matrix(M, *, copy: bool = False) -> np.ndarray:
    """Coerce to a finite 2-D float64 Fortran-ordered array."""
    arr = np.array(M, dtype=np.float64, order="F", copy=True) if copy else np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("matrix must have at least one row")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite entries")
    return np.asfortranarray(arr)


def frobenius_sq(M: np.ndarray) -> float:
    """Sum of squared entries."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    return float(_kernels.sum_sq(np.asfortranarray(M)))


def thin_svd(M: np.ndarray):
    """Thin SVD ``M = U @ diag(S) @ V.T`` with ``S`` non-increasing.

    Falls back to LAPACK ``gesvd`` when the default divide-and-conquer driver
    fails to converge; raises :class:`SVDConvergenceError` if both fail.
    """
    M = np.asarray(M, dtype=np.float64)
    rows, cols = M.shape
    if cols < 1:
        raise ValueError("thin_svd needs at least one column")
    try:
        U, S, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            U, S, Vt = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SVDConvergenceError(rows, cols) from exc
    return np.asfortranarray(U), S, np.asfortranarray(Vt.T)


def singular_values(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.shape[1] == 0:
        return np.zeros(0)
    try:
        return np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SVDConvergenceError(*M.shape) from exc


def sym_eig_desc(S: np.ndarray, tol: Tolerances = DEFAULT_TOL):
    """Eigen-decomposition of a symmetric PSD matrix, eigenvalues descending.

    Eigenvalues in ``[-eig_clamp * lmax, 0)`` are clamped to zero; anything
    more negative is rejected since callers only pass Gram matrices.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise LinalgError(f"sym_eig_desc needs a square matrix, got {S.shape}")
    n = S.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0), order="F")
    scale = np.abs(S).max()
    if scale == 0.0:
        return np.zeros(n), np.asfortranarray(np.eye(n))
    if np.abs(S - S.T).max() > 1e-10 * scale:
        raise LinalgError("matrix is not symmetric to 1e-10 relative")
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    lam = lam[::-1].copy()
    V = V[:, ::-1]
    lmax = max(lam[0], 0.0)
    floor = -tol.eig_clamp * lmax
    if lam[-1] < floor:
        raise LinalgError(f"matrix is not positive semidefinite (eigenvalue {lam[-1]:.3e}, lmax {lmax:.3e})")
    np.maximum(lam, 0.0, out=lam)
    return lam, np.asfortranarray(V)


def orthonormal_basis(M: np.ndarray, tol: Tolerances = DEFAULT_TOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis for the numerical range of ``M`` via pivoted QR.

    A pivot is kept iff ``|R[j, j]|`` exceeds ``tol.rank_threshold(M.shape, scale)``.
    ``scale`` defaults to ``sigma_max(M)``; callers projecting a block against
    an existing basis pass the block's own norm so rounding noise in a
    near-zero residual is not promoted to new directions.
    """
    M = np.asarray(M, dtype=np.float64)
    rows, cols = M.shape
    if cols == 0 or not np.any(M):
        return np.zeros((rows, 0), order="F")
    Q, R, _ = scipy.linalg.qr(M, mode="economic", pivoting=True)
    if scale is None:
        # sigma(M) == sigma(R) since M P = Q R
        scale = float(singular_values(R)[0])
    thresh = tol.rank_threshold((rows, cols), scale)
    diag = np.abs(np.diag(R))
    k = int(np.count_nonzero(diag > thresh))
    # pivoted QR keeps |R_jj| non-increasing, so the kept set is a prefix
    return np.asfortranarray(Q[:, :k])


def project_residual(Q: np.ndarray, A: np.ndarray) -> np.ndarray:
    """``(I - Q Q^T) A`` with one re-orthogonalization pass."""
    return project_split(Q, A)[0]


def project_split(Q: np.ndarray, A: np.ndarray):
    """Return ``(R, Y)`` such that ``A = Q @ Y + R`` and ``Q.T @ R ~ 0``."""
    Q = np.asarray(Q, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if Q.shape[0] != A.shape[0]:
        raise ValueError(f"row mismatch: basis has {Q.shape[0]} rows, block has {A.shape[0]}")
    if Q.shape[1] >= Q.shape[0] and Q.shape[1] > 0:
        # full basis: nothing is orthogonal to it
        return np.zeros_like(A, order="F"), np.asfortranarray(Q.T @ A)
    return _kernels.project_residual(Q, A)


def exact_trunc_error(M: np.ndarray, r: int) -> float:
    """Frobenius norm of what the best rank-``r`` approximation of ``M`` discards."""
    return float(np.sqrt(exact_trunc_error_sq(M, r)))


def exact_trunc_error_sq(M: np.ndarray, r: int) -> float:
    if r < 0:
        raise ValueError("rank must be non-negative")
    M = np.asarray(M, dtype=np.float64)
    if M.shape[1] == 0:
        return 0.0
    s = singular_values(M)
    tail = s[r:]
    return float(np.dot(tail, tail))
