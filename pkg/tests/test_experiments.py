import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from figure_lines import FIGURE_LINES
from roundhash.analytics import predicted_stash_fraction
from roundhash.experiments import (
    StatsReport,
    bench_hash,
    bucket_range,
    dist_stats,
    regular_hashes,
    stash_sim,
    stash_trace,
    table_check,
    trace_s0,
)
from roundhash.round_mapping import RoundMapper


@given(st.lists(st.integers(1, 10**6), min_size=1, max_size=300))
def test_report_ordering(counts):
    r = StatsReport.from_counts(np.array(counts))
    assert 0 < r.min <= r.p1 <= r.p99 <= r.max
    assert r.percentile_ratio >= 1
    assert r.sigma_over_mu_pct >= 0


def test_report_values():
    r = StatsReport.from_counts(np.array([90, 110] * 50))
    assert r.sigma_over_mu_pct == pytest.approx(10.0)
    assert (r.min, r.max) == (0.9, 1.1)


@pytest.mark.parametrize("strategy", ["round", "jump", "linear"])
def test_single_bucket_is_exact(strategy):
    r = dist_stats(strategy, 1, 1, 1000)
    assert (r.min, r.p1, r.p99, r.max, r.percentile_ratio) == (1, 1, 1, 1, 1)
    assert r.sigma_over_mu_pct == 0


def test_rejects_fewer_samples_than_buckets():
    with pytest.raises(ValueError):
        dist_stats("round", 4, 100, 99)
    with pytest.raises(ValueError):
        dist_stats("linear", 8, 4, 100)


def test_regular_hashes_match_the_tally_kernel():
    mapper = RoundMapper.at(5, 77)
    hashes = regular_hashes(100_003)
    assert hashes[1] == (2**64 - 1) // 100_003
    counts = np.bincount(mapper.find_buckets(hashes), minlength=77)
    assert np.array_equal(counts, mapper.tally_regular(100_003))
    # chunked generation agrees with one shot
    assert np.array_equal(np.concatenate([regular_hashes(100_003, 0, 500), regular_hashes(100_003, 500)]), hashes)


def test_round_unit_slack_ratio_is_two():
    r = dist_stats("round", 1, 10_000, 10**6)
    assert r.percentile_ratio == pytest.approx(2.0, abs=0.03)


def test_bucket_range():
    assert bucket_range(1024, 4096) == [1024, 2048, 4096]
    assert bucket_range(1000, 5000) == [1000, 1024, 2048, 4096, 5000]
    assert bucket_range(7, 7) == [7]
    with pytest.raises(ValueError):
        bucket_range(10, 5)


def test_bench_without_calls_is_empty():
    assert bench_hash("round", 4, 16, 64, 0) == ([], 0)


def test_bench_rows_and_checksum():
    rows, check = bench_hash("jump", 1, 16, 256, 2000, repeats=1)
    assert [r.buckets for r in rows] == [16, 32, 64, 128, 256]
    assert all(r.ns_per_call > 0 and r.sum_ns_per_element > 0 for r in rows)
    again = bench_hash("jump", 1, 16, 256, 2000, repeats=1)[1]
    assert check == again
    assert bench_hash("jump", 1, 16, 256, 2000, repeats=1, seed=1)[1] != check


def test_bench_rejects_sizes_below_s0():
    with pytest.raises(ValueError):
        bench_hash("round", 64, 16, 128, 100, repeats=1)


def test_stash_sim_is_seeded():
    a = stash_sim(64, 0.1, 4, 64, min_n_blocks=16, seed=3)
    b = stash_sim(64, 0.1, 4, 64, min_n_blocks=16, seed=3)
    assert a == b and a.n == 64 * 64
    assert a.predicted == predicted_stash_fraction(64, 0.1, 4)
    assert 0 < a.measured < 1


def test_trace_s0():
    assert trace_s0(0.1) == 20
    assert trace_s0(0.03) == 67
    assert trace_s0("1/7") == 14
    with pytest.raises(ValueError):
        trace_s0(0)


def test_trace_shape():
    pts = stash_trace(16, 0.25, 40, every=5, seed=2)
    assert [p.n for p in pts] == list(range(5, 641, 5))
    assert all(p.stash >= 0 for p in pts)
    assert stash_trace(16, 0.25, 0) == []


def test_trace_spikes_shrink_within_rounds():
    # the worst stash/n in the first half of a round's steps beats the second half
    pts = stash_trace(1024, 0.1, 1 << 13, seed=11)
    s0 = trace_s0(0.1)
    rounds = {}
    for p in pts:
        if p.n >= 64 * 1024:
            rounds.setdefault(p.q, {}).setdefault(p.s, []).append(p.stash / p.n)
    full = {q: steps for q, steps in rounds.items() if len(steps) == s0}
    assert len(full) >= 4
    for steps in full.values():
        order = sorted(steps)
        first = max(max(steps[s]) for s in order[: s0 // 2])
        last = max(max(steps[s]) for s in order[s0 // 2 :])
        assert first > last


def test_table_check_figure_lines():
    lines, ok = table_check(3, 45)
    assert ok
    for _, seq in FIGURE_LINES:
        assert seq in lines
    assert lines[-3] == FIGURE_LINES[-1][1]


def test_table_check_small_cases():
    lines, ok = table_check(3, 9)
    assert ok and lines[-3] == "0 1 2 6 8 10 3 4 5 7 9 11"
    lines, ok = table_check(3, 0)
    assert ok and lines[0] == "0 1 2" and len(lines) == 3


@pytest.mark.parametrize("s0", [1, 2, 5])
def test_table_check_one_line_per_step(s0):
    lines, ok = table_check(s0, 6 * s0)
    assert ok
    seqs = lines[:-2]
    assert all(len(set(map(int, seq.split()))) == len(seq.split()) for seq in seqs)
    assert len(seqs[-1].split()) == 7 * s0
