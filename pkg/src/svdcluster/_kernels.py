"""Hot inner loops, compiled with numba when available.

Every kernel exists twice: a ``*_numba`` version decorated with ``@njit`` and a
pure-numpy ``*_numpy`` version with identical semantics. The public names
(``sum_sq``, ``project_residual``, ...) are bound to one family at import time.

Set ``SVDCLUSTER_DISABLE_NUMBA=1`` to force the numpy path (useful for
debugging and for the backend comparison benchmark). If numba cannot be
imported the numpy path is used silently.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


ENV_FLAG = "SVDCLUSTER_DISABLE_NUMBA"


def _numba_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------


def sum_sq_numpy(M: np.ndarray) -> float:
    flat = M.ravel(order="K")
    return float(np.dot(flat, flat))


def project_residual_numpy(Q: np.ndarray, A: np.ndarray):
    """Return ``(R, Y)`` with ``A = Q @ Y + R`` and ``Q.T @ R ~ 0``.

    Two Gram-Schmidt passes; ``Y`` accumulates both passes so the split of
    ``A`` is exact in exact arithmetic.
    """
    if Q.shape[1] == 0:
        return A.copy(order="F"), np.zeros((0, A.shape[1]), order="F")
    Y = Q.T @ A
    R = A - Q @ Y
    Y2 = Q.T @ R
    R -= Q @ Y2
    Y += Y2
    return np.asfortranarray(R), np.asfortranarray(Y)


def residual_norms_sq_numpy(Q: np.ndarray, packed: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Squared residual norm of each column group ``packed[:, offsets[i]:offsets[i+1]]``."""
    nblocks = offsets.shape[0] - 1
    if packed.shape[1] == 0:
        return np.zeros(nblocks)
    R, _ = project_residual_numpy(Q, packed)
    return group_sums(np.einsum("ij,ij->j", R, R), offsets)


def group_sums(col: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    # np.add.reduceat mishandles empty and trailing groups
    return np.array([col[offsets[i] : offsets[i + 1]].sum() for i in range(offsets.shape[0] - 1)], dtype=np.float64)


def tail_accept_count_numpy(total: float, excess: float, energies: np.ndarray, eps_sq: float) -> int:
    """Longest prefix of ``energies`` keeping ``(excess + tail) <= eps_sq * (total + tail)``.

    ``excess`` is the head energy a rank-r truncation misses; the uncaptured
    energy is accumulated directly rather than as ``total - capture``.
    """
    if energies.shape[0] == 0:
        return 0
    cum = np.cumsum(energies)
    ok = excess + cum <= eps_sq * (total + cum)
    bad = np.flatnonzero(~ok)
    return int(bad[0]) if bad.size else int(energies.shape[0])


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------


@njit(cache=True, fastmath=True)
def sum_sq_numba(M):
    s = 0.0
    for j in range(M.shape[1]):
        for i in range(M.shape[0]):
            s += M[i, j] * M[i, j]
    return s


@njit(cache=True)
def _project_residual_nb(Q, A):
    Y = Q.T @ A
    R = A - Q @ Y
    Y2 = Q.T @ R
    R -= Q @ Y2
    Y += Y2
    return R, Y


def project_residual_numba(Q: np.ndarray, A: np.ndarray):
    if Q.shape[1] == 0:
        return A.copy(order="F"), np.zeros((0, A.shape[1]), order="F")
    R, Y = _project_residual_nb(np.asfortranarray(Q), np.asfortranarray(A))
    return np.asfortranarray(R), np.asfortranarray(Y)


@njit(cache=True)
def _residual_norms_sq_nb(Q, packed, offsets):
    # two classical Gram-Schmidt passes through BLAS, then one fused pass
    # that squares and sums each column group without materializing R*R
    R, _ = _project_residual_nb(Q, packed)
    nblocks = offsets.shape[0] - 1
    out = np.zeros(nblocks)
    m = R.shape[0]
    for b in range(nblocks):
        acc = 0.0
        for j in range(offsets[b], offsets[b + 1]):
            for i in range(m):
                acc += R[i, j] * R[i, j]
        out[b] = acc
    return out


def residual_norms_sq_numba(Q: np.ndarray, packed: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    return _residual_norms_sq_nb(
        np.asfortranarray(Q), np.asfortranarray(packed), np.ascontiguousarray(offsets, dtype=np.int64)
    )


@njit(cache=True)
def tail_accept_count_numba(total, excess, energies, eps_sq):
    tail = 0.0
    for i in range(energies.shape[0]):
        tail += energies[i]
        if excess + tail > eps_sq * (total + tail):
            return i
    return energies.shape[0]


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

NUMPY_KERNELS = {
    "sum_sq": sum_sq_numpy,
    "project_residual": project_residual_numpy,
    "residual_norms_sq": residual_norms_sq_numpy,
    "tail_accept_count": tail_accept_count_numpy,
}

NUMBA_KERNELS = {
    "sum_sq": sum_sq_numba,
    "project_residual": project_residual_numba,
    "residual_norms_sq": residual_norms_sq_numba,
    "tail_accept_count": tail_accept_count_numba,
}

BACKEND = "numba" if NUMBA_AVAILABLE and not _numba_disabled() else "numpy"
_ACTIVE = NUMBA_KERNELS if BACKEND == "numba" else NUMPY_KERNELS

sum_sq = _ACTIVE["sum_sq"]
project_residual = _ACTIVE["project_residual"]
residual_norms_sq = _ACTIVE["residual_norms_sq"]
tail_accept_count = _ACTIVE["tail_accept_count"]
