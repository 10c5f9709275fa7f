"""Command-line experiment harness.

Every verb writes CSV (``table-check`` writes plain text) to ``--out`` or
stdout.  Exit status is 0 on success, 1 when ``table-check`` finds an audit
failure and 2 on bad arguments.
"""

from __future__ import annotations

import argparse
import csv
import sys
from contextlib import contextmanager
from fractions import Fraction

from roundhash import experiments as ex


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as err:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from err


def _count(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return value


@contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _csv(fh, header, rows) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def _strategy_s0(parser: argparse.ArgumentParser, args) -> int:
    if args.strategy == "jump":
        if args.s0 is not None:
            parser.error("jump hashing has no s0 parameter")
        return 1
    if args.s0 is None:
        parser.error(f"{args.strategy} needs --s0")
    return args.s0


# -- verbs ----------------------------------------------------------------------


def cmd_dist_stats(parser, args) -> int:
    s0 = _strategy_s0(parser, args)
    report = ex.dist_stats(args.strategy, s0, args.buckets, args.samples)
    with _output(args.out) as fh:
        _csv(
            fh,
            ["strategy", "s0", "buckets", "samples", "sigma_over_mu_pct", "min", "p1", "p99", "max", "percentile_ratio"],
            [[
                args.strategy, "" if args.strategy == "jump" else s0, args.buckets, args.samples,
                repr(report.sigma_over_mu_pct), repr(report.min), repr(report.p1),
                repr(report.p99), repr(report.max), repr(report.percentile_ratio),
            ]],
        )
    return 0


def cmd_bench_hash(parser, args) -> int:
    s0 = _strategy_s0(parser, args)
    rows, checksum = ex.bench_hash(
        args.strategy, s0, args.min_buckets, args.max_buckets, args.calls,
        seed=args.seed, repeats=args.repeats,
    )
    with _output(args.out) as fh:
        _csv(
            fh,
            ["buckets", "ns_per_call", "sum_ns_per_element", "relative"],
            [[r.buckets, f"{r.ns_per_call:.3f}", f"{r.sum_ns_per_element:.3f}", f"{r.relative:.3f}"] for r in rows],
        )
    print(f"checksum {checksum:#018x}", file=sys.stderr)
    return 0


def cmd_stash_sim(parser, args) -> int:
    result = ex.stash_sim(
        args.B, args.epsilon, args.s0, args.max_n_blocks,
        min_n_blocks=args.min_n_blocks, seed=args.seed,
    )
    with _output(args.out) as fh:
        _csv(
            fh,
            ["B", "epsilon", "s0", "n", "measured", "predicted"],
            [[args.B, repr(float(args.epsilon)), args.s0, result.n, repr(result.measured), repr(result.predicted)]],
        )
    return 0


def cmd_stash_trace(parser, args) -> int:
    points = ex.stash_trace(args.B, args.epsilon, args.max_n_blocks, every=args.every, seed=args.seed)
    with _output(args.out) as fh:
        _csv(fh, ["n", "stash", "q", "s"], [[p.n, p.stash, p.q, p.s] for p in points])
    return 0


def cmd_table_check(parser, args) -> int:
    inserts = args.inserts if args.inserts is not None else 15 * args.s0
    lines, ok = ex.table_check(args.s0, inserts, seed=args.seed)
    with _output(args.out) as fh:
        fh.write("\n".join(lines) + "\n")
    return 0 if ok else 1


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roundhash", description="Round-hashing experiment harness.")
    verbs = parser.add_subparsers(dest="verb", required=True)

    def verb(name, func, help_text):
        p = verbs.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=_u64, default=ex.DEFAULT_SEED, help=f"RNG seed (default {ex.DEFAULT_SEED})")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        return p

    p = verb("dist-stats", cmd_dist_stats, "bucket-size statistics for evenly spaced hashes")
    p.add_argument("--strategy", choices=ex.STRATEGIES, required=True)
    p.add_argument("--s0", type=_positive, default=None)
    p.add_argument("--buckets", type=_positive, required=True)
    p.add_argument("--samples", type=_positive, default=10**7)

    p = verb("bench-hash", cmd_bench_hash, "lookup time as the bucket count varies")
    p.add_argument("--strategy", choices=ex.STRATEGIES, required=True)
    p.add_argument("--s0", type=_positive, default=None)
    p.add_argument("--min-buckets", type=_positive, default=1 << 10)
    p.add_argument("--max-buckets", type=_positive, default=1 << 24)
    p.add_argument("--calls", type=_count, default=10**6)
    p.add_argument("--repeats", type=_positive, default=5)

    p = verb("stash-sim", cmd_stash_sim, "worst stash fraction while a table fills")
    p.add_argument("--B", type=_positive, required=True)
    p.add_argument("--epsilon", type=_fraction, required=True)
    p.add_argument("--s0", type=_positive, required=True)
    p.add_argument("--max-n-blocks", type=_positive, default=1 << 13)
    p.add_argument("--min-n-blocks", type=_positive, default=1 << 10)

    p = verb("stash-trace", cmd_stash_trace, "stash size against n with s0 = ceil(2/epsilon)")
    p.add_argument("--B", type=_positive, required=True)
    p.add_argument("--epsilon", type=_fraction, required=True)
    p.add_argument("--max-n-blocks", type=_count, default=1 << 13)
    p.add_argument("--every", type=_positive, default=None, help="inserts between samples (default B)")

    p = verb("table-check", cmd_table_check, "print the arc permutation and run the audits")
    p.add_argument("--s0", type=_positive, required=True)
    p.add_argument("--inserts", type=_count, default=None, help="new buckets to add (default 15*s0, four rounds)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except (ValueError, OverflowError) as err:
        parser.error(str(err))


if __name__ == "__main__":
    sys.exit(main())
