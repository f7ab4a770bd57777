import random

import pytest
from hypothesis import given, settings, strategies as st

from chipmap.mapping import (
    MappingEncoding,
    MappingError,
    ParallelKind,
    canonical,
    from_text,
    partition,
    schedule_order,
    segment_spans,
    to_text,
    validate,
)
from conftest import random_valid_encoding


def enc_of(mb, seg, matrix):
    return MappingEncoding(mb, tuple(seg), tuple(tuple(r) for r in matrix))


class TestValidate:
    def test_valid_fig_sizes(self):
        enc = enc_of(2, [0, 1, 0], [[0, 1, 2, 3]] * 4)
        assert validate(enc, n=8, m=4, c=4) == []

    def test_divisibility(self):
        enc = enc_of(3, [0, 0, 0], [[0] * 4] * 2)
        assert any("divide" in v for v in validate(enc, 8, 4, 4))

    def test_segmentation_length(self):
        enc = enc_of(2, [0, 0, 0, 0], [[0] * 4] * 4)
        assert any("M-1" in v for v in validate(enc, 8, 4, 4))

    def test_chip_range_and_shape(self):
        enc = enc_of(2, [0, 0, 0], [[0, 1, 2, 9]] * 4)
        assert any("chip id 9" in v for v in validate(enc, 8, 4, 4))
        enc = enc_of(2, [0, 0, 0], [[0, 1, 2, 3]] * 3)
        assert any("rows" in v for v in validate(enc, 8, 4, 4))


class TestPartition:
    def test_no_boundaries(self):
        enc = enc_of(2, [0, 0, 0], [[0] * 4] * 4)
        subs = partition(enc, 4)
        assert len(subs) == 4
        assert all((s.layer_lo, s.layer_hi) == (0, 4) for s in subs)

    def test_all_boundaries(self):
        enc = enc_of(2, [1, 1, 1], [[0] * 4] * 4)
        subs = partition(enc, 4)
        assert len(subs) == 16
        assert all(s.layer_hi - s.layer_lo == 1 for s in subs)

    def test_interior_boundary(self):
        enc = enc_of(8, [0, 1, 0], [[0] * 4])
        spans = {(s.layer_lo, s.layer_hi) for s in partition(enc, 4)}
        assert spans == {(0, 2), (2, 4)}


class TestScheduleOrder:
    def test_row_wise(self):
        enc = enc_of(1, [0], [[0, 1], [2, 3]])
        cells = schedule_order(enc, 2).cells
        assert [(r, l) for r, l, _ in cells] == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_column_wise(self):
        enc = enc_of(1, [1], [[0, 1], [2, 3]])
        cells = schedule_order(enc, 2).cells
        assert [(r, l) for r, l, _ in cells] == [(0, 0), (1, 0), (0, 1), (1, 1)]

    def test_mixed_segments(self):
        enc = enc_of(1, [1, 0], [[0, 0, 0], [1, 1, 1]])
        cells = schedule_order(enc, 3).cells
        assert [(r, l) for r, l, _ in cells] == [
            (0, 0), (1, 0), (0, 1), (0, 2), (1, 1), (1, 2)]

    def test_chip_comes_from_matrix(self):
        enc = enc_of(1, [0], [[5, 7], [2, 4]])
        assert schedule_order(enc, 2).cells == ((0, 0, 5), (0, 1, 7), (1, 0, 2), (1, 1, 4))

    def test_row_restriction(self):
        enc = enc_of(1, [0], [[0, 1], [2, 3]])
        cells = schedule_order(enc, 2, rows=1).cells
        assert cells == ((0, 0, 0), (0, 1, 1))
        with pytest.raises(MappingError):
            schedule_order(enc, 2, rows=3)


class TestCanonical:
    def test_data_parallel(self):
        enc = canonical(ParallelKind.DATA, 8, 4, 4)
        assert enc.micro_batch_size == 2
        assert enc.segmentation == (0, 0, 0)
        assert enc.layer_to_chip == tuple((r,) * 4 for r in range(4))

    def test_model_parallel(self):
        enc = canonical("mp", 8, 4, 4)
        assert enc.micro_batch_size == 8
        assert enc.layer_to_chip == ((0, 1, 2, 3),)

    def test_pipeline(self):
        enc = canonical("pp", 8, 4, 4)
        assert enc.micro_batch_size == 1
        assert enc.segmentation == (1, 1, 1)
        assert enc.layer_to_chip == ((0, 1, 2, 3),) * 8

    def test_round_robin_when_layers_exceed_chips(self):
        enc = canonical("mp", 4, 6, 4)
        assert enc.layer_to_chip == ((0, 1, 2, 3, 0, 1),)

    def test_dp_infeasible(self):
        with pytest.raises(MappingError):
            canonical("dp", 2, 4, 4)
        with pytest.raises(MappingError):
            canonical("dp", 9, 4, 2)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 12), m=st.integers(1, 10), c=st.integers(1, 6),
       seed=st.integers(0, 999))
def test_schedule_order_is_permutation(n, m, c, seed):
    enc = random_valid_encoding(n, m, c, random.Random(seed))
    order = schedule_order(enc, m)
    cells = [(r, l) for r, l, _ in order.cells]
    assert sorted(cells) == [(r, l) for r in range(enc.rows) for l in range(m)]


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 12), m=st.integers(1, 10), c=st.integers(1, 6),
       seed=st.integers(0, 999))
def test_partition_schedule_consistency(n, m, c, seed):
    enc = random_valid_encoding(n, m, c, random.Random(seed))
    order = schedule_order(enc, m)
    subs = partition(enc, m)
    assert len(subs) == enc.rows * (1 + sum(enc.segmentation))
    # cells of each subgraph occupy one contiguous run of the emitted order
    position = {(r, l): i for i, (r, l, _) in enumerate(order.cells)}
    for sub in subs:
        idx = sorted(position[(sub.micro_batch_id, l)]
                     for l in range(sub.layer_lo, sub.layer_hi))
        assert idx == list(range(idx[0], idx[0] + len(idx)))


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(list(ParallelKind)), n=st.integers(1, 16),
       m=st.integers(1, 12), c=st.integers(1, 8))
def test_canonicals_validate(kind, n, m, c):
    if kind is ParallelKind.DATA and (c > n or n % c):
        return
    enc = canonical(kind, n, m, c)
    assert validate(enc, n, m, c) == []


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 10), m=st.integers(1, 8), c=st.integers(1, 6),
       seed=st.integers(0, 999))
def test_text_round_trip(n, m, c, seed):
    enc = random_valid_encoding(n, m, c, random.Random(seed))
    assert from_text(to_text(enc)) == enc


def test_from_text_errors():
    with pytest.raises(MappingError):
        from_text("nothing useful")


def test_segment_spans_cover():
    assert segment_spans(()) == [(0, 1)]
    assert segment_spans((1, 0, 1)) == [(0, 1), (1, 3), (3, 4)]
