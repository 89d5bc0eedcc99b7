"""Spectral state for a growing concatenation, updated one block at a time.

Two trackers are provided:

* :class:`ResidualTracker` keeps an orthonormal basis of everything appended so
  far and the pooled squared singular values of each block's residual against
  that basis. Residual ranges are pairwise orthogonal, so the pooled multiset
  equals the spectrum of the concatenated residuals without ever forming it.
  Never truncated; it backs a certified bound.
* :class:`GramTracker` keeps ``M M^T = Q S Q^T`` exactly until
  :func:`gram_truncate` compresses ``S`` to its top ``r`` eigenpairs.

Both also accumulate the energy that their spectrum does *not* represent
(``outside_sq``), so error estimates can be summed from small terms instead of
being formed as a difference of two nearly equal totals.

Trackers are immutable values; every update returns a new tracker, so a
tentative append is just an append whose result is discarded.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .bounds import BoundValue, plugin_estimate, residual_bound
from .linalg import DEFAULT_TOL, Tolerances, orthonormal_basis, project_split, singular_values, sym_eig_desc


def _check_rows(m: int, block) -> None:
    if block.rows != m:
        raise ValueError(f"row mismatch: tracker has {m} rows, block {block.block_id!r} has {block.rows}")


def _pad(values: np.ndarray, r: int) -> np.ndarray:
    if values.shape[0] >= r:
        return values
    return np.concatenate([values, np.zeros(r - values.shape[0])])


@dataclass(frozen=True)
class ResidualTracker:
    m: int
    basis: np.ndarray
    mu_sq: np.ndarray
    total_energy_sq: float = 0.0
    member_ids: tuple[str, ...] = ()
    tol: Tolerances = DEFAULT_TOL
    # energy inside earlier bases plus residual directions below the rank threshold
    outside_sq: float = 0.0

    @classmethod
    def empty(cls, m: int, tol: Tolerances = DEFAULT_TOL) -> "ResidualTracker":
        return cls(m, np.zeros((m, 0), order="F"), np.zeros(0), 0.0, (), tol, 0.0)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def residual_append(t: ResidualTracker, block) -> ResidualTracker:
    _check_rows(t.m, block)
    A = block.data
    R, Y = project_split(t.basis, A)
    outside = _kernels.sum_sq(np.asfortranarray(Y)) if Y.size else 0.0
    thresh = t.tol.rank_threshold(A.shape, block.norm)
    if t.rank >= t.m or not np.any(R):
        basis, new_sq = t.basis, np.zeros(0)
        outside += _kernels.sum_sq(R)
    else:
        s = singular_values(R)
        keep = s > thresh
        new_sq = s[keep] ** 2
        outside += float(np.dot(s[~keep], s[~keep]))
        ext = orthonormal_basis(R, t.tol, scale=block.norm) if new_sq.size else np.zeros((t.m, 0))
        basis = np.asfortranarray(np.hstack([t.basis, ext])) if ext.shape[1] else t.basis
    mu_sq = t.mu_sq
    if new_sq.size:
        mu_sq = np.sort(np.concatenate([mu_sq, new_sq]))[::-1].copy()
    return ResidualTracker(
        t.m,
        basis,
        mu_sq,
        t.total_energy_sq + block.energy_sq,
        t.member_ids + (block.block_id,),
        t.tol,
        t.outside_sq + float(outside),
    )


def residual_top_mu(t: ResidualTracker, r: int) -> np.ndarray:
    """The ``r`` largest pooled residual singular values, zero padded."""
    return _pad(np.sqrt(t.mu_sq[:r]), r)


def residual_certificate(t: ResidualTracker, r: int) -> BoundValue:
    """Certified rank-``r`` error bound for the tracked concatenation."""
    return residual_bound(t.total_energy_sq, np.sqrt(t.mu_sq), r, outside_sq=t.outside_sq)


@dataclass(frozen=True)
class GramTracker:
    m: int
    basis: np.ndarray
    gram: np.ndarray
    target_rank: int
    total_energy_sq: float = 0.0
    member_ids: tuple[str, ...] = ()
    discarded_energy: float = 0.0
    tol: Tolerances = DEFAULT_TOL
    # residual energy below the rank threshold, never entered into S
    dropped_sq: float = 0.0

    @classmethod
    def empty(cls, m: int, target_rank: int, tol: Tolerances = DEFAULT_TOL) -> "GramTracker":
        if target_rank < 1:
            raise ValueError("target rank must be positive")
        return cls(m, np.zeros((m, 0), order="F"), np.zeros((0, 0), order="F"), target_rank, 0.0, (), 0.0, tol, 0.0)

    @property
    def outside_sq(self) -> float:
        return self.discarded_energy + self.dropped_sq

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def gram_append(t: GramTracker, block) -> GramTracker:
    """Exact extension of ``Q S Q^T`` by ``A A^T``; never truncates."""
    _check_rows(t.m, block)
    A = block.data
    R, Y = project_split(t.basis, A)
    if t.rank < t.m and np.any(R):
        Q_res = orthonormal_basis(R, t.tol, scale=block.norm)
    else:
        Q_res = np.zeros((t.m, 0))
    B = Q_res.T @ R
    lost = _kernels.sum_sq(np.asfortranarray(R - Q_res @ B)) if R.size else 0.0
    k, p = t.rank, Q_res.shape[1]
    S = np.empty((k + p, k + p), order="F")
    S[:k, :k] = t.gram + Y @ Y.T
    S[:k, k:] = Y @ B.T
    S[k:, :k] = S[:k, k:].T
    S[k:, k:] = B @ B.T
    basis = np.asfortranarray(np.hstack([t.basis, Q_res])) if p else t.basis
    return replace(
        t,
        basis=basis,
        gram=S,
        total_energy_sq=t.total_energy_sq + block.energy_sq,
        member_ids=t.member_ids + (block.block_id,),
        dropped_sq=t.dropped_sq + float(lost),
    )


def gram_truncate(t: GramTracker) -> GramTracker:
    """Keep the top ``target_rank`` eigenpairs of ``S`` (re-basing ``Q``)."""
    if t.rank == 0:
        return t
    lam, U = sym_eig_desc(t.gram, t.tol)
    r = min(t.target_rank, lam.shape[0])
    dropped = float(lam[r:].sum())
    return replace(
        t,
        basis=np.asfortranarray(t.basis @ U[:, :r]),
        gram=np.asfortranarray(np.diag(lam[:r])),
        discarded_energy=t.discarded_energy + dropped,
    )


def gram_append_truncate(t: GramTracker, block) -> GramTracker:
    return gram_truncate(gram_append(t, block))


def gram_sigma_tilde(t: GramTracker) -> np.ndarray:
    """Square roots of the eigenvalues of ``S``, descending, padded to ``target_rank``."""
    if t.rank == 0:
        return np.zeros(t.target_rank)
    lam, _ = sym_eig_desc(t.gram, t.tol)
    return _pad(np.sqrt(lam), t.target_rank)


def plugin_certificate(t: GramTracker, r: int | None = None) -> BoundValue:
    """Plug-in rank-``r`` estimate (``r`` defaults to the target rank)."""
    r = t.target_rank if r is None else r
    return plugin_estimate(t.total_energy_sq, gram_sigma_tilde(t), r, outside_sq=t.outside_sq)


def residual_norm_of(t: ResidualTracker | GramTracker, block) -> float:
    """``||(I - Q Q^T) A||_F`` against the tracker's current basis (read-only)."""
    _check_rows(t.m, block)
    if t.rank == 0:
        return block.norm
    R, _ = project_split(t.basis, block.data)
    return float(np.sqrt(_kernels.sum_sq(R)))


def residual_norms_sq(basis: np.ndarray, packed: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Squared residual norms of many candidate blocks packed side by side.

    ``packed[:, offsets[i]:offsets[i+1]]`` is candidate ``i``.
    """
    if basis.shape[1] == 0:
        return _kernels.group_sums(np.einsum("ij,ij->j", packed, packed), offsets)
    if basis.shape[1] >= basis.shape[0]:
        return np.zeros(offsets.shape[0] - 1)
    return _kernels.residual_norms_sq(basis, packed, offsets)
