"""Reports: verification of a store, the slack diagnostic, and (epsilon, rank) sweeps.

Every report is CSV text with a fixed header; column order is part of the
interface. Floats are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .bounds import exact_value, slack, summarize, weyl_bound
from .clustering import Partition, run_algorithm
from .collection import Collection
from .linalg import exact_trunc_error_sq
from .store import (
    CompressedStore,
    cluster_errors,
    compress,
    compression_ratio,
    global_relative_error,
    memory_footprint,
)
from .tracker import (
    GramTracker,
    ResidualTracker,
    gram_append_truncate,
    plugin_certificate,
    residual_append,
    residual_certificate,
)

# Per-trial seeds are SeedSequence(seed, spawn_key=(SLACK_STREAM, size, trial)),
# so adding sizes or trials never changes the subsets drawn for existing ones.
SLACK_STREAM = 0x51AC

ESTIMATORS = ("weyl", "residual", "plugin")
CERTIFIED = ("max-norm", "residual")


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def _header(cls) -> list[str]:
    return [f.name for f in fields(cls)]


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerifyRow:
    cluster_id: str
    members: str
    r_c: int | None
    exact_error: float
    relative_error: float
    predicted_error: float | None
    slack: float | None
    memory: int
    compression_ratio: float


GLOBAL_ROW_ID = "GLOBAL"


def verify(coll: Collection, store: CompressedStore, plan: Partition | None = None) -> list[VerifyRow]:
    """One row per cluster plus a trailing ``GLOBAL`` row."""
    errors = cluster_errors(coll, store)
    predicted = {c.cluster_id: c.predicted for c in plan.clusters} if plan is not None else {}
    rows = []
    for e, c in zip(errors, store.clusters):
        mem = c.rank * (store.m + c.width)
        p = predicted.get(e.cluster_id)
        rows.append(
            VerifyRow(
                e.cluster_id,
                ";".join(e.members),
                e.rank,
                e.error,
                e.relative,
                None if p is None else p.error,
                None if p is None else p.error - e.error,
                mem,
                store.m * c.width / mem,
            )
        )
    total_err = math.sqrt(math.fsum(e.error_sq for e in errors))
    rows.append(
        VerifyRow(
            GLOBAL_ROW_ID,
            str(len(coll)),
            None,
            total_err,
            global_relative_error(errors),
            None,
            None,
            memory_footprint(store),
            compression_ratio(coll, store),
        )
    )
    return rows


def verify_report(rows: Sequence[VerifyRow]) -> str:
    return _csv(_header(VerifyRow), (astuple(r) for r in rows))


# ---------------------------------------------------------------------------
# slack diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlackRecord:
    trial: int
    cluster_size: int
    estimator: str
    predicted: float
    exact: float
    slack: float


def trial_rng(seed: int, size: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(SLACK_STREAM, size, trial)))


def estimate_all(coll: Collection, ids: Sequence[str], r: int) -> dict:
    """Exact error and the three predictions for ``ids`` fed in the given order."""
    blocks = [coll.get(b) for b in ids]
    total = math.fsum(b.energy_sq for b in blocks)
    exact = exact_value(total, exact_trunc_error_sq(coll.concat(ids), r))
    weyl = weyl_bound([summarize(b) for b in blocks], r)
    rt = ResidualTracker.empty(coll.m)
    gt = GramTracker.empty(coll.m, r)
    for b in blocks:
        rt = residual_append(rt, b)
        gt = gram_append_truncate(gt, b)
    return {
        "exact": exact,
        "weyl": weyl,
        "residual": residual_certificate(rt, r),
        "plugin": plugin_certificate(gt, r),
    }


def bench_slack(coll: Collection, rank: int, sizes: Sequence[int], trials: int, seed: int) -> list[SlackRecord]:
    """Uniform block subsets per (size, trial); blocks fed norm-descending (ties by id)."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if rank < 1:
        raise ValueError("rank must be positive")
    n = len(coll)
    for s in sizes:
        if not 1 <= s <= n:
            raise ValueError(f"cluster size {s} outside [1, {n}]")
    records = []
    for size in sizes:
        for trial in range(trials):
            pick = trial_rng(seed, size, trial).choice(n, size=size, replace=False)
            blocks = sorted((coll[int(i)] for i in pick), key=lambda b: b.block_id)
            blocks.sort(key=lambda b: -b.energy_sq)
            est = estimate_all(coll, [b.block_id for b in blocks], rank)
            exact = est["exact"]
            for name in ESTIMATORS:
                p = est[name]
                records.append(SlackRecord(trial, size, name, p.error, exact.error, slack(p, exact)))
    return records


def slack_report(records: Sequence[SlackRecord]) -> str:
    return _csv(_header(SlackRecord), (astuple(r) for r in records))


def mean_slack(records: Sequence[SlackRecord]) -> dict[str, float]:
    out = {}
    for name in ESTIMATORS:
        vals = [r.slack for r in records if r.estimator == name]
        out[name] = float(np.mean(vals)) if vals else float("nan")
    return out


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRecord:
    epsilon: float
    rank: int
    algorithm: str
    sort_mode: str
    compression_ratio: float
    relative_error: float
    wall_time_ms: float
    eps_monotone: int


def run_cell(
    coll: Collection,
    algorithm: str,
    epsilon: float,
    rank: int,
    sort: str | None = None,
    *,
    k: int | None = None,
    seed: int = 0,
) -> tuple[Partition, CompressedStore, list[VerifyRow], float]:
    """cluster -> compress -> verify; returns elapsed wall time in ms as the last item."""
    t0 = time.perf_counter()
    plan = run_algorithm(coll, algorithm, epsilon, rank, sort, k=k, seed=seed)
    store = compress(coll, plan)
    rows = verify(coll, store, plan)
    return plan, store, rows, (time.perf_counter() - t0) * 1e3


def sweep(
    coll: Collection,
    algorithm: str,
    sort: str | None,
    epsilons: Sequence[float],
    ranks: Sequence[int],
    *,
    k: int | None = None,
    seed: int = 0,
    timing: bool = True,
) -> list[SweepRecord]:
    """Full (epsilon, rank) cross product, ordered by (epsilon, rank).

    ``eps_monotone`` flags whether the ratio did not drop relative to the next
    smaller epsilon at the same rank; it is informational only.
    """
    if not epsilons or not ranks:
        raise ValueError("epsilon and rank grids must be non-empty")
    cells = {}
    for eps in epsilons:
        for r in ranks:
            _, _, rows, ms = run_cell(coll, algorithm, eps, r, sort, k=k, seed=seed)
            g = rows[-1]
            cells[(eps, r)] = (g.compression_ratio, g.relative_error, ms if timing else 0.0)
    out = []
    eps_sorted = sorted(set(epsilons))
    for eps in epsilons:
        for r in ranks:
            ratio, rel, ms = cells[(eps, r)]
            i = eps_sorted.index(eps)
            mono = 1 if i == 0 or ratio >= cells[(eps_sorted[i - 1], r)][0] else 0
            out.append(SweepRecord(eps, r, algorithm, sort or "", ratio, rel, ms, mono))
    return out


def sweep_report(records: Sequence[SweepRecord]) -> str:
    return _csv(_header(SweepRecord), (astuple(r) for r in records))


def parse_report(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))
