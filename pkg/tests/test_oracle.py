import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from figure_lines import FIGURE_LINES
from roundhash.oracle import PermutationOracle, RationalArcModel
from roundhash.round_mapping import RoundMapper


def test_init_sequences():
    assert list(PermutationOracle(3).seq()) == [0, 1, 2]
    assert list(PermutationOracle(1).seq()) == [0]
    assert list(PermutationOracle(5).seq()) == [0, 1, 2, 3, 4]


def test_init_rejects_zero():
    with pytest.raises(ValueError):
        PermutationOracle(0)


@pytest.mark.parametrize("m,line", FIGURE_LINES)
def test_figure_lines(m, line):
    assert " ".join(map(str, PermutationOracle(3).grow_to(m).seq())) == line


def test_mid_step_trace():
    assert list(PermutationOracle(3).grow_to(9).seq()) == [0, 1, 2, 6, 8, 3, 4, 5, 7]


def test_bucket_at():
    oracle = PermutationOracle(3).grow_to(12)
    assert oracle.bucket_at(3) == 6
    with pytest.raises(IndexError):
        oracle.bucket_at(12)
    for m in range(3, 40):
        assert PermutationOracle(3).grow_to(m).bucket_at(0) == 0


def test_fraction_in_init_state():
    assert PermutationOracle(3).arc_of_fraction(1, 2) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=10), st.integers(min_value=0, max_value=400))
def test_sequence_is_permutation(s0, inserts):
    oracle = PermutationOracle(s0).grow_to(s0 + inserts)
    assert sorted(oracle.seq()) == list(range(s0 + inserts))


@pytest.mark.parametrize("s0", [1, 2, 3, 5])
def test_round_lengths(s0):
    for q in range(6):
        oracle = PermutationOracle(s0).grow_to(s0 << q)
        assert len(oracle.seq()) == s0 << q
        # a round ends exactly when the last step's scan reaches the end
        assert oracle.rebuilt == oracle.m


@pytest.mark.parametrize("s0", [2, 3, 4])
def test_every_other_chunk_is_previous_round(s0):
    for q in range(1, 6):
        seq = PermutationOracle(s0).grow_to(s0 << q).seq()
        chunks = seq.reshape(-1, s0)
        assert np.array_equal(chunks[::2].ravel(), PermutationOracle(s0).grow_to(s0 << (q - 1)).seq())
        assert all(c.min() >= s0 << (q - 1) for c in chunks[1::2])


def test_rational_lengths_sum_to_one():
    for m in range(7, 80):
        oracle = PermutationOracle(7).grow_to(m)
        model = oracle.arc_model()
        assert sum(model.length(j)[0] for j in range(model.count)) == model.total
        assert len({model.length(j)[0] for j in range(model.count)}) <= 2


def test_rational_model_rejects_bad_fraction():
    with pytest.raises(ValueError):
        RationalArcModel.from_weights([1, 1]).arc_of_fraction(3, 2)


@pytest.mark.parametrize("s0", [1, 2, 3, 7])
def test_arc_boundaries_agree_with_mapper(s0):
    mapper = RoundMapper(s0)
    oracle = PermutationOracle(s0)
    for _ in range(120):
        model = oracle.arc_model()
        w = mapper.total_weight
        for j in range(1, mapper.m):
            # first 64-bit point at or after the boundary, and the ones around it
            edge = -(-(mapper.arc_start(j) << 64) // w)
            for h in (edge - 1, edge, edge + 1):
                assert mapper.arc_of(h) == model.arc_of_fraction(h, 1 << 64)
        mapper.new_bucket()
        oracle.new_bucket()


def test_copy_is_independent():
    oracle = PermutationOracle(3).grow_to(10)
    twin = oracle.copy()
    oracle.new_bucket()
    assert twin.m == 10 and list(twin.seq()) == list(PermutationOracle(3).grow_to(10).seq())
