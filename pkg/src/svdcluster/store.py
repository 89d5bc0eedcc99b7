"""Shared-basis compressed store: one ``(U_tilde, V)`` pair per cluster."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import Partition
from .collection import Collection
from .linalg import frobenius_sq, thin_svd

STORE_VERSION = 1


@dataclass(frozen=True, eq=False)
class CompressedCluster:
    """``M_c ~ U_tilde @ V.T`` with ``U_tilde = U_c diag(S_c)`` (m x r_c) and ``V`` (N_c x r_c)."""

    cluster_id: str
    rank: int
    U_tilde: np.ndarray
    members: tuple[tuple[str, int], ...]
    V: np.ndarray

    def __post_init__(self):
        n_c = sum(c for _, c in self.members)
        if self.U_tilde.shape[1] != self.rank or self.V.shape != (n_c, self.rank):
            raise ValueError(
                f"cluster {self.cluster_id!r}: factor shapes {self.U_tilde.shape}, {self.V.shape} "
                f"do not match rank {self.rank} and width {n_c}"
            )

    @property
    def width(self) -> int:
        return self.V.shape[0]

    def member_slice(self, block_id: str) -> slice:
        start = 0
        for bid, cols in self.members:
            if bid == block_id:
                return slice(start, start + cols)
            start += cols
        raise KeyError(block_id)

    def __eq__(self, other):
        if not isinstance(other, CompressedCluster):
            return NotImplemented
        return (
            self.cluster_id == other.cluster_id
            and self.rank == other.rank
            and self.members == other.members
            and self.U_tilde.shape == other.U_tilde.shape
            and self.U_tilde.tobytes(order="F") == other.U_tilde.tobytes(order="F")
            and self.V.shape == other.V.shape
            and self.V.tobytes(order="F") == other.V.tobytes(order="F")
        )


@dataclass(frozen=True)
class CompressedStore:
    m: int
    clusters: tuple[CompressedCluster, ...]
    format_version: int = STORE_VERSION

    def __post_init__(self):
        seen: set[str] = set()
        for c in self.clusters:
            if c.U_tilde.shape[0] != self.m:
                raise ValueError(f"cluster {c.cluster_id!r} has {c.U_tilde.shape[0]} rows, store has m={self.m}")
            for bid, _ in c.members:
                if bid in seen:
                    raise ValueError(f"block id {bid!r} appears in more than one cluster")
                seen.add(bid)

    @property
    def block_ids(self) -> list[str]:
        return [bid for c in self.clusters for bid, _ in c.members]

    def locate(self, block_id: str) -> CompressedCluster:
        for c in self.clusters:
            if any(bid == block_id for bid, _ in c.members):
                return c
        raise KeyError(f"unknown block id {block_id!r}")


def compress_cluster(coll: Collection, cluster_id: str, members, rank: int) -> CompressedCluster:
    M = coll.concat(members)
    rank = int(rank)
    if not 1 <= rank <= min(coll.m, M.shape[1]):
        raise ValueError(f"cluster {cluster_id!r}: rank {rank} outside [1, {min(coll.m, M.shape[1])}]")
    U, S, V = thin_svd(M)
    U_tilde = np.asfortranarray(U[:, :rank] * S[:rank])
    return CompressedCluster(
        cluster_id,
        rank,
        U_tilde,
        tuple((b, coll.get(b).cols) for b in members),
        np.asfortranarray(V[:, :rank]),
    )


def compress(coll: Collection, plan: Partition) -> CompressedStore:
    """Concatenate, truncate and factor every cluster of ``plan``."""
    plan.check_cover(coll)
    clusters = tuple(compress_cluster(coll, c.cluster_id, c.members, c.rank) for c in plan.clusters)
    return CompressedStore(coll.m, clusters)


def reconstruct_block(store: CompressedStore, block_id: str) -> np.ndarray:
    c = store.locate(block_id)
    return np.asfortranarray(c.U_tilde @ c.V[c.member_slice(block_id)].T)


def memory_footprint(store: CompressedStore) -> int:
    """Stored real values: ``sum_c r_c (m + N_c)``."""
    return sum(c.rank * (store.m + c.width) for c in store.clusters)


def compression_ratio(coll: Collection, store: CompressedStore) -> float:
    if set(store.block_ids) != set(coll.ids):
        raise ValueError("store does not cover the collection")
    return coll.total_params / memory_footprint(store)


@dataclass(frozen=True)
class ClusterError:
    cluster_id: str
    members: tuple[str, ...]
    rank: int
    energy_sq: float
    error_sq: float

    @property
    def error(self) -> float:
        return math.sqrt(self.error_sq)

    @property
    def relative(self) -> float:
        return math.sqrt(self.error_sq / self.energy_sq) if self.energy_sq > 0 else 0.0


def cluster_errors(coll: Collection, store: CompressedStore) -> list[ClusterError]:
    """Measured reconstruction error of every cluster, from the decoded blocks."""
    if set(store.block_ids) != set(coll.ids) or len(store.block_ids) != len(coll):
        raise ValueError("store does not cover the collection")
    out = []
    for c in store.clusters:
        energy = math.fsum(coll.get(b).energy_sq for b, _ in c.members)
        err = math.fsum(frobenius_sq(coll.get(b).data - reconstruct_block(store, b)) for b, _ in c.members)
        out.append(ClusterError(c.cluster_id, tuple(b for b, _ in c.members), c.rank, energy, err))
    return out


def global_relative_error(errors: list[ClusterError]) -> float:
    total = math.fsum(e.energy_sq for e in errors)
    err = math.fsum(e.error_sq for e in errors)
    return math.sqrt(err / total) if total > 0 else 0.0
