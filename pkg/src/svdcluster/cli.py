"""Command-line entry point: ``svdcluster <command> [flags]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import codec, harness, synth
from .clustering import ALGORITHMS, Partition, run_algorithm
from .store import compress, reconstruct_block


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_gen(args) -> None:
    coll = synth.generate(
        args.profile, args.count, args.rows, args.cols, args.seed, true_rank=args.true_rank, alpha=args.alpha
    )
    codec.write_collection(coll, args.output)


def cmd_cluster(args) -> None:
    coll = codec.read_collection(args.input)
    plan = run_algorithm(
        coll,
        args.algorithm,
        args.epsilon,
        args.rank,
        args.sort,
        k=args.k,
        seed=args.seed,
        skip_rejected=args.skip_rejected,
    )
    _emit(plan.to_json(), args.output)


def cmd_compress(args) -> None:
    coll = codec.read_collection(args.input)
    plan = Partition.from_json(Path(args.plan).read_text())
    codec.write_store(compress(coll, plan), args.output)


def cmd_reconstruct(args) -> None:
    store = codec.read_store(args.store)
    if args.all:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        for bid in store.block_ids:
            (out / f"{bid}.mat").write_bytes(codec.encode_matrix(reconstruct_block(store, bid)))
    else:
        Path(args.output).write_bytes(codec.encode_matrix(reconstruct_block(store, args.block)))


def cmd_verify(args) -> None:
    coll = codec.read_collection(args.input)
    store = codec.read_store(args.store)
    plan = Partition.from_json(Path(args.plan).read_text()) if args.plan else None
    _emit(harness.verify_report(harness.verify(coll, store, plan)), args.report)


def cmd_bench_slack(args) -> None:
    coll = codec.read_collection(args.input)
    records = harness.bench_slack(coll, args.rank, _int_list(args.sizes), args.trials, args.seed)
    _emit(harness.slack_report(records), args.report)


def cmd_sweep(args) -> None:
    coll = codec.read_collection(args.input)
    if args.sort is not None and args.algorithm not in ("residual", "approx"):
        raise ValueError(f"--sort is only valid for residual and approx, not {args.algorithm}")
    records = harness.sweep(
        coll,
        args.algorithm,
        args.sort,
        _float_list(args.epsilons),
        _int_list(args.ranks),
        k=args.k,
        seed=args.seed,
        timing=not args.no_timing,
    )
    _emit(harness.sweep_report(records), args.report)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="svdcluster", description="Error-budgeted clustering and shared-basis SVD compression.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic .mcol collection")
    g.add_argument("--profile", required=True, choices=synth.PROFILES)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--true-rank", type=int, default=4, help="shared-subspace rank")
    g.add_argument("--alpha", type=float, default=1.0, help="decaying-spectrum exponent")
    g.add_argument("--output", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("cluster", help="cluster a collection and write a JSON plan")
    c.add_argument("--input", required=True)
    c.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    c.add_argument("--epsilon", type=float)
    c.add_argument("--rank", type=int, required=True)
    c.add_argument("--sort", choices=("frobenius", "residual"))
    c.add_argument("--k", type=int, help="cluster count (random only)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--skip-rejected", action="store_true", help="keep scanning candidates after a rejection")
    c.add_argument("--output")
    c.set_defaults(func=cmd_cluster)

    z = sub.add_parser("compress", help="compress a collection according to a plan")
    z.add_argument("--input", required=True)
    z.add_argument("--plan", required=True)
    z.add_argument("--output", required=True)
    z.set_defaults(func=cmd_compress)

    r = sub.add_parser("reconstruct", help="decode blocks from a .msvd store")
    r.add_argument("--store", required=True)
    which = r.add_mutually_exclusive_group(required=True)
    which.add_argument("--block")
    which.add_argument("--all", action="store_true")
    r.add_argument("--output", required=True, help="file (single block) or directory (--all)")
    r.set_defaults(func=cmd_reconstruct)

    v = sub.add_parser("verify", help="measure per-cluster and global errors of a store")
    v.add_argument("--input", required=True)
    v.add_argument("--store", required=True)
    v.add_argument("--plan", help="plan with predicted errors, for the slack column")
    v.add_argument("--report")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench-slack", help="predicted-minus-exact error on random block subsets")
    b.add_argument("--input", required=True)
    b.add_argument("--rank", type=int, required=True)
    b.add_argument("--sizes", required=True, help="comma list of cluster sizes")
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--report")
    b.set_defaults(func=cmd_bench_slack)

    s = sub.add_parser("sweep", help="cluster/compress/verify over an (epsilon, rank) grid")
    s.add_argument("--input", required=True)
    s.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    s.add_argument("--sort", choices=("frobenius", "residual"))
    s.add_argument("--epsilons", required=True)
    s.add_argument("--ranks", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-timing", action="store_true", help="write 0 in wall_time_ms for byte-stable reports")
    s.add_argument("--report")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (OSError, ValueError, KeyError, ArithmeticError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"svdcluster {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
