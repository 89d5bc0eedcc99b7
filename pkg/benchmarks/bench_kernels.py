"""Compare the numba and numpy kernel families, then time one clustering run per backend.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--output bench.csv]

Kernel rows call both families directly in one process (JIT compile is
excluded by a warm-up call). The in-process sweep row rebinds the module-level
kernel names to each family in turn. The subprocess row runs ``svdcluster
sweep`` with and without SVDCLUSTER_DISABLE_NUMBA, so it also pays numba's
per-process start-up (LLVM init and cache load), which dominates small runs.
"""

from __future__ import annotations

import argparse
import csv
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from svdcluster import _kernels, harness, synth
from svdcluster.codec import write_collection

SIZES = [(64, 8, 32), (256, 32, 128), (768, 64, 512)]  # (m, basis rank, candidate columns)


def _best(fn, repeat: int) -> float:
    fn()  # warm-up (compiles numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times) * 1e3


def kernel_rows(repeat: int):
    rng = np.random.default_rng(0)
    for m, k, n in SIZES:
        Q, _ = np.linalg.qr(rng.standard_normal((m, k)))
        Q = np.asfortranarray(Q)
        A = np.asfortranarray(rng.standard_normal((m, n)))
        widths = np.full(n // 4, 4)
        offsets = np.concatenate([[0], np.cumsum(widths)]).astype(np.int64)
        energies = rng.uniform(0, 1e-3, size=n)
        calls = {
            "sum_sq": lambda f: f(A),
            "project_residual": lambda f: f(Q, A),
            "residual_norms_sq": lambda f: f(Q, A, offsets),
            "tail_accept_count": lambda f: f(100.0, 0.0, energies, 0.05),
        }
        for name, call in calls.items():
            ms = {}
            for family, table in (("numpy", _kernels.NUMPY_KERNELS), ("numba", _kernels.NUMBA_KERNELS)):
                ms[family] = _best(lambda: call(table[name]), repeat)
            yield [name, f"{m}x{n} (basis {k})", ms["numpy"], ms["numba"], ms["numpy"] / ms["numba"]]


def _bind(table) -> None:
    for name, fn in table.items():
        setattr(_kernels, name, fn)


def in_process_rows(repeat: int):
    coll = synth.generate("decaying-spectrum", 60, 128, 8, seed=0, alpha=1.0)
    ms = {}
    saved = {name: getattr(_kernels, name) for name in _kernels.NUMPY_KERNELS}
    try:
        for family, table in (("numpy", _kernels.NUMPY_KERNELS), ("numba", _kernels.NUMBA_KERNELS)):
            _bind(table)
            ms[family] = _best(
                lambda: harness.sweep(coll, "residual", "residual", [0.05, 0.2], [8, 16], timing=False), repeat
            )
    finally:
        _bind(saved)
    yield ["sweep in-process", "60 blocks 128x8", ms["numpy"], ms["numba"], ms["numpy"] / ms["numba"]]


def end_to_end_rows(repeat: int):
    with tempfile.TemporaryDirectory() as d:
        coll = Path(d) / "c.mcol"
        write_collection(synth.generate("decaying-spectrum", 60, 128, 8, seed=0, alpha=1.0), coll)
        cmd = [sys.executable, "-m", "svdcluster.cli", "sweep", "--input", str(coll), "--algorithm", "residual",
               "--sort", "residual", "--epsilons", "0.05,0.2", "--ranks", "8,16", "--no-timing",
               "--report", str(Path(d) / "r.csv")]
        ms = {}
        for family, flag in (("numpy", "1"), ("numba", "")):
            env = dict(os.environ, **{_kernels.ENV_FLAG: flag})
            subprocess.run(cmd, env=env, check=True)  # warm the numba cache
            best = []
            for _ in range(repeat):
                t0 = time.perf_counter()
                subprocess.run(cmd, env=env, check=True)
                best.append(time.perf_counter() - t0)
            ms[family] = min(best) * 1e3
        yield ["sweep subprocess", "60 blocks 128x8", ms["numpy"], ms["numba"], ms["numpy"] / ms["numba"]]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.add_argument("--skip-end-to-end", action="store_true")
    args = p.parse_args(argv)
    rows = list(kernel_rows(args.repeat))
    if not args.skip_end_to_end:
        rows += list(in_process_rows(max(1, args.repeat // 2)))
        rows += list(end_to_end_rows(max(1, args.repeat // 2)))
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["kernel", "shape", "numpy_ms", "numba_ms", "speedup"])
        for r in rows:
            w.writerow([r[0], r[1], f"{r[2]:.4f}", f"{r[3]:.4f}", f"{r[4]:.2f}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
