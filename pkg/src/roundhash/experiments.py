"""Experiment drivers behind the command-line verbs.

Every function here returns plain data; :mod:`roundhash.cli` only parses
flags and writes CSV.  Anything random draws from ``numpy.random.default_rng``
seeded by the caller, so reruns with the same seed give the same rows.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass
from functools import partial
from fractions import Fraction

import numba
import numpy as np

from roundhash.analytics import predicted_stash_fraction
from roundhash.baselines import make_strategy
from roundhash.oracle import PermutationOracle
from roundhash.round_mapping import RoundMapper
from roundhash.round_table import AuditError, RoundTable, TableConfig, _as_fraction

__all__ = [
    "DEFAULT_SEED",
    "STRATEGIES",
    "StatsReport",
    "StashTracePoint",
    "StashSimResult",
    "BenchRow",
    "dist_stats",
    "regular_hashes",
    "bench_hash",
    "stash_sim",
    "stash_trace",
    "trace_s0",
    "table_check",
]

DEFAULT_SEED = 20240521
STRATEGIES = ("round", "jump", "linear")

_CHUNK = 1 << 22


# -- distribution -------------------------------------------------------------


@dataclass(frozen=True)
class StatsReport:
    """Bucket-size statistics; extremes and percentiles are ratios to the mean load."""

    counts: np.ndarray
    sigma_over_mu_pct: float
    min: float
    p1: float
    p99: float
    max: float

    @property
    def percentile_ratio(self) -> float:
        return self.p99 / self.p1

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "StatsReport":
        counts = np.asarray(counts)
        alpha = float(counts.sum()) / len(counts)
        if alpha <= 0:
            raise ValueError("no samples were tallied")
        p1, p99 = np.percentile(counts, [1, 99])
        return cls(
            counts=counts,
            sigma_over_mu_pct=100 * float(counts.std()) / alpha,
            min=float(counts.min()) / alpha,
            p1=float(p1) / alpha,
            p99=float(p99) / alpha,
            max=float(counts.max()) / alpha,
        )


def regular_hashes(samples: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Hashes ``k * ((2**64 - 1) // samples)`` for ``start <= k < stop``."""
    stop = samples if stop is None else stop
    step = np.uint64(((1 << 64) - 1) // samples)
    return np.arange(start, stop, dtype=np.uint64) * step


def dist_stats(strategy: str, s0: int, buckets: int, samples: int) -> StatsReport:
    """Tally ``samples`` evenly spaced hashes over ``buckets`` buckets."""
    if samples < buckets:
        raise ValueError("need at least one sample per bucket")
    if strategy == "round":
        return StatsReport.from_counts(RoundMapper.at(s0, buckets).tally_regular(samples))
    placer = make_strategy(strategy, s0)
    if buckets < placer.num_buckets():
        raise ValueError(f"{strategy} starts at {placer.num_buckets()} buckets")
    placer.grow_to(buckets)
    counts = np.zeros(buckets, dtype=np.int64)
    for lo in range(0, samples, _CHUNK):
        hit = placer.buckets(regular_hashes(samples, lo, min(lo + _CHUNK, samples)))
        counts += np.bincount(hit, minlength=buckets)
    return StatsReport.from_counts(counts)


# -- lookup timing ------------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    buckets: int
    ns_per_call: float
    sum_ns_per_element: float

    @property
    def relative(self) -> float:
        return self.ns_per_call / self.sum_ns_per_element


@numba.njit(cache=True)
def _sum_keys(keys):
    total = np.uint64(0)
    for k in range(keys.shape[0]):
        total += keys[k]
    return total


def bucket_range(min_buckets: int, max_buckets: int) -> list[int]:
    """Powers of two from ``min_buckets`` up to ``max_buckets``, plus both ends."""
    if not 1 <= min_buckets <= max_buckets:
        raise ValueError("need 1 <= min-buckets <= max-buckets")
    sizes = {min_buckets, max_buckets}
    b = 1 << min_buckets.bit_length()
    while b < max_buckets:
        sizes.add(b)
        b <<= 1
    return sorted(sizes)


def bench_hash(
    strategy: str,
    s0: int,
    min_buckets: int,
    max_buckets: int,
    calls: int,
    *,
    seed: int = DEFAULT_SEED,
    repeats: int = 5,
) -> tuple[list[BenchRow], int]:
    """Median ns per lookup at each bucket count, and an XOR checksum of all results.

    Lookups run over one pre-generated key array through the batch kernel.
    After a warm-up pass, each of ``repeats`` rounds times every bucket
    count once, so slow drift in machine load is spread over all sizes.
    Summing the same array gives the per-element baseline.
    """
    if repeats < 1:
        raise ValueError("repeats must be positive")
    sizes = bucket_range(min_buckets, max_buckets)
    if calls == 0:
        return [], 0
    keys = np.random.default_rng(seed).integers(0, 1 << 64, calls, dtype=np.uint64, endpoint=False)
    jobs = [partial(_sum_keys, keys)]
    for m in sizes:
        placer = make_strategy(strategy, s0)
        if m < placer.num_buckets():
            raise ValueError(f"{strategy} starts at {placer.num_buckets()} buckets")
        jobs.append(partial(placer.grow_to(m).buckets, keys))
    checksum = 0
    for job in jobs[1:]:
        checksum ^= int(np.bitwise_xor.reduce(job()))
    jobs[0]()
    times = [[] for _ in jobs]
    for _ in range(repeats):
        for k, job in enumerate(jobs):
            t0 = time.perf_counter_ns()
            job()
            times[k].append(time.perf_counter_ns() - t0)
    ns = [statistics.median(t) / calls for t in times]
    return [BenchRow(m, ns[k + 1], ns[0]) for k, m in enumerate(sizes)], checksum


# -- stash experiments --------------------------------------------------------


@dataclass(frozen=True)
class StashSimResult:
    measured: float
    predicted: float
    n: int


@dataclass(frozen=True)
class StashTracePoint:
    n: int
    stash: int
    q: int
    s: int


def _random_keys(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.integers(1, 1 << 64, count, dtype=np.uint64, endpoint=False)


def stash_sim(
    B: int,
    epsilon,
    s0: int,
    max_n_blocks: int,
    *,
    min_n_blocks: int = 1 << 10,
    seed: int = DEFAULT_SEED,
) -> StashSimResult:
    """Worst stash/n while inserting random keys up to ``max_n_blocks * B``.

    The worst case is taken over every ``n`` from ``min_n_blocks * B`` on
    (clipped to the run length); small tables are dominated by rounding.
    """
    if B < 1 or s0 < 1 or max_n_blocks < 1:
        raise ValueError("B, s0 and max-n-blocks must be positive")
    table = RoundTable(TableConfig(B, epsilon, s0))
    table.track_peak(min(min_n_blocks, max_n_blocks) * B)
    rng = np.random.default_rng(seed)
    total = max_n_blocks * B
    for lo in range(0, total, _CHUNK):
        table.insert_many(_random_keys(rng, min(_CHUNK, total - lo)))
    eps = float(table.config.epsilon)
    return StashSimResult(table.peak_ratio, predicted_stash_fraction(B, eps, s0), table.n)


def trace_s0(epsilon) -> int:
    eps = _as_fraction(epsilon)
    if not 0 < eps < 1:
        raise ValueError("the trace needs 0 < epsilon < 1")
    return math.ceil(2 / eps)


def stash_trace(
    B: int,
    epsilon,
    max_n_blocks: int,
    *,
    every: int | None = None,
    seed: int = DEFAULT_SEED,
) -> list[StashTracePoint]:
    """Stash size after every ``every`` inserts (default ``B``), with ``s0 = ceil(2/eps)``."""
    s0 = trace_s0(epsilon)
    every = B if every is None else every
    if every < 1:
        raise ValueError("sampling interval must be positive")
    table = RoundTable(TableConfig(B, epsilon, s0))
    rng = np.random.default_rng(seed)
    total = max_n_blocks * B
    points = []
    for lo in range(0, total, every):
        table.insert_many(_random_keys(rng, min(every, total - lo)))
        mp = table.mapper
        points.append(StashTracePoint(table.n, table.stash_size, mp.q, mp.s))
    return points


# -- golden permutations and audits ------------------------------------------


def table_check(s0: int, inserts: int, *, seed: int = DEFAULT_SEED) -> tuple[list[str], bool]:
    """Permutation lines plus audit verdicts; the flag is true iff every audit passed.

    One line is printed per completed step (and one for the final state if
    it falls inside a step), each the arc-order bucket sequence.
    """
    if inserts < 0:
        raise ValueError("inserts must be non-negative")
    oracle = PermutationOracle(s0)
    mapper = RoundMapper(s0)
    lines = []
    mismatch = None

    def compare():
        nonlocal mismatch
        if mismatch is None and not np.array_equal(mapper.permutation(), oracle.seq()):
            mismatch = oracle.m

    compare()
    lines.append(" ".join(map(str, oracle.seq().tolist())))
    for k in range(inserts):
        oracle.new_bucket()
        mapper.new_bucket()
        compare()
        if oracle.rebuilt == oracle.m or k == inserts - 1:
            lines.append(" ".join(map(str, oracle.seq().tolist())))

    ok = mismatch is None
    if ok:
        lines.append(f"mapper-vs-oracle: ok ({inserts + 1} states)")
    else:
        lines.append(f"mapper-vs-oracle: FAIL (first mismatch at m={mismatch})")

    placement = _placement_audit(s0, s0 + inserts, seed)
    lines.append("placement: " + placement)
    return lines, ok and placement.startswith("ok")


def _placement_audit(s0: int, m: int, seed: int) -> str:
    # grow a small table to m buckets, audit, shrink it halfway, audit again
    config = TableConfig(4, Fraction(1, 4), s0)
    table = RoundTable(config)
    keys = _random_keys(np.random.default_rng(seed), config.max_keys(m))
    try:
        table.insert_many(keys)
        table.audit()
        grown = table.num_buckets()
        for x in keys[: len(keys) // 2].tolist():
            table.delete(x)
        table.audit()
    except AuditError as err:
        return f"FAIL ({err})"
    return f"ok ({len(keys)} keys, {grown} buckets)"
