"""Greedy, certificate-driven clustering of a collection under an error budget.

Three algorithms share one control flow: pick the largest remaining block as
anchor, then grow the cluster with candidates while a merge certificate on the
post-merge state stays within the budget.

* ``max-norm``  - norms only (Weyl bound with a multi-block head).
* ``residual``  - pooled residual singular values (certified).
* ``approx``    - truncated incremental Gram tracker (plug-in, uncertified).

Plus a seeded random baseline. Ties are always broken by ascending block id.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .bounds import BoundValue, exact_value
from .collection import Block, Collection
from .linalg import exact_trunc_error_sq, singular_values
from .tracker import (
    GramTracker,
    ResidualTracker,
    gram_append_truncate,
    plugin_certificate,
    residual_append,
    residual_certificate,
    residual_norms_sq,
)

PLAN_FORMAT = "svdcluster-plan"
PLAN_VERSION = 1

ALGORITHMS = ("max-norm", "residual", "approx", "random")


class SortMode(str, enum.Enum):
    FROBENIUS = "frobenius"
    RESIDUAL = "residual"


@dataclass(frozen=True)
class ErrorBudget:
    epsilon: float
    target_rank: int

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if int(self.target_rank) != self.target_rank or self.target_rank < 1:
            raise ValueError(f"target rank must be a positive integer, got {self.target_rank}")

    def admits(self, bound: BoundValue) -> bool:
        return bound.relative <= self.epsilon


@dataclass(frozen=True)
class Cluster:
    cluster_id: str
    members: tuple[str, ...]
    width: int
    rank: int
    predicted: BoundValue

    def to_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "members": list(self.members),
            "width": self.width,
            "rank": self.rank,
            "predicted": self.predicted.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Cluster":
        return cls(
            str(d["cluster_id"]),
            tuple(str(x) for x in d["members"]),
            int(d["width"]),
            int(d["rank"]),
            BoundValue.from_dict(d["predicted"]),
        )


@dataclass(frozen=True)
class Partition:
    m: int
    clusters: tuple[Cluster, ...]
    algorithm: str
    epsilon: float | None = None
    rank: int | None = None
    sort_mode: str | None = None
    seed: int | None = None

    @property
    def block_ids(self) -> list[str]:
        return [b for c in self.clusters for b in c.members]

    def cluster_of(self, block_id: str) -> Cluster:
        for c in self.clusters:
            if block_id in c.members:
                return c
        raise KeyError(block_id)

    def check_cover(self, coll: Collection) -> None:
        ids = self.block_ids
        if len(ids) != len(set(ids)):
            raise ValueError("partition assigns some block to more than one cluster")
        if set(ids) != set(coll.ids):
            missing = sorted(set(coll.ids) - set(ids))[:3]
            extra = sorted(set(ids) - set(coll.ids))[:3]
            raise ValueError(f"partition does not cover the collection (missing {missing}, unknown {extra})")
        if self.m != coll.m:
            raise ValueError(f"partition is for m={self.m}, collection has m={coll.m}")

    def to_json(self) -> str:
        doc = {
            "format": PLAN_FORMAT,
            "version": PLAN_VERSION,
            "algorithm": self.algorithm,
            "epsilon": self.epsilon,
            "rank": self.rank,
            "sort_mode": self.sort_mode,
            "seed": self.seed,
            "m": self.m,
            "clusters": [c.to_dict() for c in self.clusters],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        doc = json.loads(text)
        if doc.get("format") != PLAN_FORMAT or doc.get("version") != PLAN_VERSION:
            raise ValueError("not a version-1 svdcluster plan")
        return cls(
            int(doc["m"]),
            tuple(Cluster.from_dict(c) for c in doc["clusters"]),
            str(doc["algorithm"]),
            doc.get("epsilon"),
            doc.get("rank"),
            doc.get("sort_mode"),
            doc.get("seed"),
        )


def _cluster_id(i: int) -> str:
    return f"c{i:04d}"


def _by_norm_desc(blocks: Sequence[Block]) -> list[Block]:
    # two stable sorts: id ascending, then energy descending
    return sorted(sorted(blocks, key=lambda b: b.block_id), key=lambda b: -b.energy_sq)


def _by_norm_asc(blocks: Sequence[Block]) -> list[Block]:
    return sorted(blocks, key=lambda b: (b.energy_sq, b.block_id))


def _require_nonempty(coll: Collection) -> None:
    if len(coll) == 0:
        raise ValueError("cannot cluster an empty collection")


def _capped_rank(r: int, m: int, width: int) -> int:
    return max(1, min(r, m, width))


def _full_rank_cluster(idx: int, m: int, blocks: list[Block], kind: str) -> Cluster:
    """Anchor that violates the budget on its own: store it at full rank (zero error)."""
    width = sum(b.cols for b in blocks)
    total = math.fsum(b.energy_sq for b in blocks)
    return Cluster(
        _cluster_id(idx),
        tuple(b.block_id for b in blocks),
        width,
        _capped_rank(width, m, width),
        BoundValue.from_sq(kind, 0.0, total),
    )


# ---------------------------------------------------------------------------
# max-norm
# ---------------------------------------------------------------------------


def cluster_max_norm(coll: Collection, budget: ErrorBudget) -> Partition:
    """Weyl-certified clustering that only needs block norms.

    The head (anchor plus the next-largest blocks while its rank is provably
    ``<= r``) is captured exactly by a rank-``r`` truncation, so the cluster
    error is at most the tail energy. If the anchor alone is wider than ``r``,
    only its top-``r`` energy is credited.
    """
    _require_nonempty(coll)
    r, m = budget.target_rank, coll.m
    eps_sq = budget.epsilon**2
    remaining = _by_norm_desc(list(coll))
    clusters: list[Cluster] = []
    while remaining:
        anchor = remaining[0]
        head = [anchor]
        width = anchor.cols
        i = 1
        while i < len(remaining) and min(m, width + remaining[i].cols) <= r:
            head.append(remaining[i])
            width += remaining[i].cols
            i += 1
        head_energy = math.fsum(b.energy_sq for b in head)
        if min(m, width) <= r:
            excess = 0.0
        else:
            s = singular_values(anchor.data)[r:]
            excess = float(np.dot(s, s))
        rest = remaining[i:]
        if excess > eps_sq * head_energy:
            zeros = [b for b in rest if b.energy_sq == 0.0]
            members = head + sorted(zeros, key=lambda b: b.block_id)
            clusters.append(_full_rank_cluster(len(clusters), m, members, "weyl"))
        else:
            tail_pool = _by_norm_asc(rest)
            energies = np.array([b.energy_sq for b in tail_pool], dtype=np.float64)
            n_tail = int(_kernels.tail_accept_count(head_energy, excess, energies, eps_sq))
            members = head + tail_pool[:n_tail]
            tail = math.fsum(energies[:n_tail])
            width = sum(b.cols for b in members)
            clusters.append(
                Cluster(
                    _cluster_id(len(clusters)),
                    tuple(b.block_id for b in members),
                    width,
                    _capped_rank(r, m, width),
                    BoundValue.from_sq("weyl", excess + tail, head_energy + tail),
                )
            )
        taken = set(clusters[-1].members)
        remaining = [b for b in remaining if b.block_id not in taken]
    return Partition(m, tuple(clusters), "max-norm", budget.epsilon, r, None, None)


# ---------------------------------------------------------------------------
# residual / approx (shared growth loop)
# ---------------------------------------------------------------------------


@dataclass
class _Certifier:
    kind: str
    start: Callable[[Block], object]
    append: Callable[[object, Block], object]
    certify: Callable[[object], BoundValue]


def _residual_certifier(m: int, r: int) -> _Certifier:
    return _Certifier(
        "residual",
        lambda b: residual_append(ResidualTracker.empty(m), b),
        residual_append,
        lambda t: residual_certificate(t, r),
    )


def _approx_certifier(m: int, r: int) -> _Certifier:
    return _Certifier(
        "plugin",
        lambda b: gram_append_truncate(GramTracker.empty(m, r), b),
        gram_append_truncate,
        lambda t: plugin_certificate(t, r),
    )


def _pack(blocks: Sequence[Block]) -> tuple[np.ndarray, np.ndarray]:
    offsets = np.zeros(len(blocks) + 1, dtype=np.int64)
    np.cumsum([b.cols for b in blocks], out=offsets[1:])
    packed = np.asfortranarray(np.hstack([b.data for b in blocks]))
    return packed, offsets


def _grow(
    coll: Collection,
    budget: ErrorBudget,
    mode: SortMode,
    cert: _Certifier,
    algorithm: str,
    skip_rejected: bool,
) -> Partition:
    _require_nonempty(coll)
    mode = SortMode(mode)
    r, m = budget.target_rank, coll.m
    remaining = _by_norm_desc(list(coll))
    clusters: list[Cluster] = []
    while remaining:
        anchor = remaining.pop(0)
        state = cert.start(anchor)
        bound = cert.certify(state)
        if not budget.admits(bound):
            zeros = sorted((b for b in remaining if b.energy_sq == 0.0), key=lambda b: b.block_id)
            clusters.append(_full_rank_cluster(len(clusters), m, [anchor] + zeros, cert.kind))
            taken = {b.block_id for b in zeros}
            remaining = [b for b in remaining if b.block_id not in taken]
            continue

        pool = list(remaining)
        if mode is SortMode.FROBENIUS:
            pool = _by_norm_asc(pool)
        while pool:
            if mode is SortMode.RESIDUAL:
                packed, offsets = _pack(pool)
                norms = residual_norms_sq(state.basis, packed, offsets)
                pick = min(range(len(pool)), key=lambda j: (norms[j], pool[j].block_id))
            else:
                pick = 0
            cand = pool.pop(pick)
            trial = cert.append(state, cand)
            if cand.energy_sq == 0.0:
                state = trial
                continue
            trial_bound = cert.certify(trial)
            if budget.admits(trial_bound):
                state, bound = trial, trial_bound
            elif not skip_rejected:
                break

        members = state.member_ids
        width = sum(coll.get(b).cols for b in members)
        clusters.append(Cluster(_cluster_id(len(clusters)), members, width, _capped_rank(r, m, width), bound))
        taken = set(members)
        remaining = [b for b in remaining if b.block_id not in taken]
    return Partition(m, tuple(clusters), algorithm, budget.epsilon, r, mode.value, None)


def cluster_residual(
    coll: Collection, budget: ErrorBudget, mode: SortMode | str = SortMode.FROBENIUS, *, skip_rejected: bool = False
) -> Partition:
    """Clustering certified by the pooled-residual upper bound."""
    return _grow(coll, budget, SortMode(mode), _residual_certifier(coll.m, budget.target_rank), "residual", skip_rejected)


def cluster_approx(
    coll: Collection, budget: ErrorBudget, mode: SortMode | str = SortMode.FROBENIUS, *, skip_rejected: bool = False
) -> Partition:
    """Clustering driven by the truncated-tracker plug-in estimate (no guarantee)."""
    return _grow(coll, budget, SortMode(mode), _approx_certifier(coll.m, budget.target_rank), "approx", skip_rejected)


# ---------------------------------------------------------------------------
# random baseline and rank assignment
# ---------------------------------------------------------------------------


def cluster_random(coll: Collection, k: int, seed: int, rank: int) -> Partition:
    """Uniform random assignment into ``k`` non-empty clusters.

    Empty clusters are filled deterministically by moving the last-listed
    block of the currently largest cluster (lowest cluster index on ties).
    Predicted errors are exact oracle values at the assigned rank.
    """
    _require_nonempty(coll)
    n = len(coll)
    if not (1 <= k <= n):
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if rank < 1:
        raise ValueError("rank must be positive")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, k, size=n)
    groups: list[list[int]] = [[] for _ in range(k)]
    for i, lab in enumerate(labels):
        groups[int(lab)].append(i)
    for c in range(k):
        if not groups[c]:
            donor = max(range(k), key=lambda d: (len(groups[d]), -d))
            groups[c].append(groups[donor].pop())
    clusters = []
    for c, idx in enumerate(groups):
        ids = [coll[i].block_id for i in sorted(idx)]
        M = coll.concat(ids)
        width = M.shape[1]
        rc = _capped_rank(rank, coll.m, width)
        total = math.fsum(coll.get(b).energy_sq for b in ids)
        clusters.append(Cluster(_cluster_id(c), tuple(ids), width, rc, exact_value(total, exact_trunc_error_sq(M, rc))))
    return Partition(coll.m, tuple(clusters), "random", None, rank, None, seed)


def assign_rank(partition: Partition, r: int) -> Partition:
    """Set every cluster's rank to ``min(r, m, N_c)``."""
    if r < 1:
        raise ValueError("rank must be positive")
    clusters = tuple(replace(c, rank=_capped_rank(r, partition.m, c.width)) for c in partition.clusters)
    return replace(partition, clusters=clusters)


def run_algorithm(
    coll: Collection,
    algorithm: str,
    epsilon: float | None,
    rank: int,
    sort: str | None = None,
    *,
    k: int | None = None,
    seed: int = 0,
    skip_rejected: bool = False,
) -> Partition:
    """Dispatch by algorithm name; validates the algorithm/sort combination."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    if sort is not None and algorithm not in ("residual", "approx"):
        raise ValueError(f"--sort is only valid for residual and approx, not {algorithm}")
    if algorithm == "random":
        if k is None:
            raise ValueError("random clustering needs k")
        return cluster_random(coll, k, seed, rank)
    if epsilon is None:
        raise ValueError(f"{algorithm} needs an epsilon")
    budget = ErrorBudget(epsilon, rank)
    if algorithm == "max-norm":
        return cluster_max_norm(coll, budget)
    mode = SortMode(sort or "frobenius")
    fn = cluster_residual if algorithm == "residual" else cluster_approx
    return fn(coll, budget, mode, skip_rejected=skip_rejected)
