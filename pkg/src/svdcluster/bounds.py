"""Closed-form bounds and estimates of the rank-r truncation error of a concatenation.

All arithmetic happens on squared quantities. Each result is clamped to
``[0, total_energy_sq]`` before the square root is taken.

``total - sum_{j<=r} x_j^2`` loses every digit when the two terms nearly
cancel, leaving ~sqrt(eps) * ||M|| of noise in the error itself. Where the
caller knows the energy *outside* the spectrum it passes (``outside_sq``), the
same quantity is evaluated as ``outside_sq + sum_{j>r} x_j^2`` instead, which
has no cancellation. Both forms are equal in exact arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import singular_values

KINDS = ("weyl", "residual", "plugin", "exact")


@dataclass(frozen=True)
class BlockSummary:
    """Per-block quantities needed by the Weyl bound."""

    block_id: str
    cols: int
    energy_sq: float
    leading_sv_sq: tuple[float, ...]
    complete: bool = False  # leading_sv_sq holds the whole spectrum

    def __post_init__(self):
        if self.cols < 1:
            raise ValueError("cols must be positive")
        if self.energy_sq < 0:
            raise ValueError("energy must be non-negative")
        lead = tuple(float(x) for x in self.leading_sv_sq)
        if any(x < 0 for x in lead) or any(a < b for a, b in zip(lead, lead[1:])):
            raise ValueError("leading_sv_sq must be non-negative and non-increasing")
        if sum(lead) > self.energy_sq * (1 + 1e-9) + 1e-300:
            raise ValueError("leading singular values exceed block energy")
        object.__setattr__(self, "leading_sv_sq", lead)

    def head_energy(self, r: int) -> float:
        """``sum_{i<=r} sigma_i^2``; raises if the stored spectrum is too short to know it."""
        lead = self.leading_sv_sq
        if len(lead) < min(r, self.cols):
            captured = sum(lead)
            # a short spectrum is still complete if it already carries all energy
            if captured < self.energy_sq * (1 - 1e-9):
                raise ValueError(
                    f"summary {self.block_id!r} holds {len(lead)} singular values, need {min(r, self.cols)}"
                )
        return float(sum(lead[:r]))

    def tail_energy(self, r: int) -> float:
        """``sum_{i>r} sigma_i^2``, summed directly when the spectrum is complete."""
        if self.complete:
            return math.fsum(self.leading_sv_sq[r:])
        return max(self.energy_sq - self.head_energy(r), 0.0)


def summarize(block, r: int | None = None) -> BlockSummary:
    """Summary with the top ``r`` squared singular values (all of them if ``r`` is None)."""
    s = singular_values(block.data)
    complete = r is None or r >= s.shape[0]
    if r is not None:
        s = s[:r]
    return BlockSummary(block.block_id, block.cols, block.energy_sq, tuple(float(x) for x in s * s), complete)


@dataclass(frozen=True)
class BoundValue:
    kind: str
    error: float
    error_sq: float
    relative: float

    @classmethod
    def from_sq(cls, kind: str, error_sq: float, total_energy_sq: float) -> "BoundValue":
        if kind not in KINDS:
            raise ValueError(f"unknown bound kind {kind!r}")
        total = max(float(total_energy_sq), 0.0)
        e2 = min(max(float(error_sq), 0.0), total)
        rel = math.sqrt(e2 / total) if total > 0 else 0.0
        return cls(kind, math.sqrt(e2), e2, min(rel, 1.0))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "error": self.error, "error_sq": self.error_sq, "relative": self.relative}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundValue":
        return cls(str(d["kind"]), float(d["error"]), float(d["error_sq"]), float(d["relative"]))


def _top_sq_sum(values: np.ndarray, r: int) -> float:
    v = np.asarray(values, dtype=np.float64)[:r]
    return float(np.dot(v, v))


def _captured_form(total: float, values: np.ndarray, r: int, outside_sq: float | None) -> float:
    if outside_sq is None:
        return total - _top_sq_sum(values, r)
    tail = np.asarray(values, dtype=np.float64)[r:]
    return outside_sq + float(np.dot(tail, tail))


def weyl_bound(summaries: Sequence[BlockSummary], r: int) -> BoundValue:
    """Total energy minus the best single-block rank-``r`` capture."""
    if not summaries:
        raise ValueError("weyl_bound needs at least one block")
    if r < 1:
        raise ValueError("rank must be positive")
    total = math.fsum(s.energy_sq for s in summaries)
    heads = [s.head_energy(r) for s in summaries]
    best = max(range(len(summaries)), key=lambda j: heads[j])
    others = math.fsum(s.energy_sq for j, s in enumerate(summaries) if j != best)
    return BoundValue.from_sq("weyl", others + summaries[best].tail_energy(r), total)


def weyl_tail_bound(total_energy_sq: float, head_energy_sq: float) -> BoundValue:
    """Simplified Weyl bound when the head is captured exactly at rank ``r``."""
    if total_energy_sq < 0 or head_energy_sq < 0:
        raise ValueError("energies must be non-negative")
    if head_energy_sq > total_energy_sq * (1 + 1e-12):
        raise ValueError("head energy exceeds total energy")
    return BoundValue.from_sq("weyl", total_energy_sq - head_energy_sq, total_energy_sq)


def residual_bound(
    total_energy_sq: float, mu: np.ndarray, r: int, outside_sq: float | None = None
) -> BoundValue:
    """Certified bound ``total - sum_{j<=r} mu_j^2`` from pooled residual singular values.

    With ``outside_sq`` (energy not represented in ``mu``), ``mu`` must be the
    full pooled spectrum.
    """
    return BoundValue.from_sq("residual", _captured_form(total_energy_sq, mu, r, outside_sq), total_energy_sq)


def plugin_estimate(
    total_energy_sq: float, sigma_tilde: np.ndarray, r: int, outside_sq: float | None = None
) -> BoundValue:
    """Uncertified estimate ``total - sum_{j<=r} sigma_tilde_j^2``; same ``outside_sq`` convention."""
    return BoundValue.from_sq("plugin", _captured_form(total_energy_sq, sigma_tilde, r, outside_sq), total_energy_sq)


def exact_value(total_energy_sq: float, error_sq: float) -> BoundValue:
    return BoundValue.from_sq("exact", error_sq, total_energy_sq)


def slack(predicted: BoundValue, exact: BoundValue) -> float:
    return predicted.error - exact.error
