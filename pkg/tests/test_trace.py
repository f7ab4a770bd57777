import pytest
from hypothesis import given, settings, strategies as st

from chipmap.trace import (
    IterationBatch,
    Strategy,
    TraceEntry,
    TraceError,
    WorkKind,
    form_batches,
    load_trace,
)


def write_trace(tmp_path, text):
    path = tmp_path / "trace.txt"
    path.write_text(text)
    return path


class TestLoadTrace:
    def test_single_line(self, tmp_path):
        assert load_trace(write_trace(tmp_path, "78 483")) == [TraceEntry(78, 483)]

    def test_minimal_request(self, tmp_path):
        assert load_trace(write_trace(tmp_path, "1 1")) == [TraceEntry(1, 1)]

    def test_order_preserved(self, tmp_path):
        entries = load_trace(write_trace(tmp_path, "866 63\n120 40"))
        assert entries == [TraceEntry(866, 63), TraceEntry(120, 40)]

    def test_comma_separated_and_comments(self, tmp_path):
        entries = load_trace(write_trace(tmp_path, "# header\n10,20\n\n30 40\n"))
        assert entries == [TraceEntry(10, 20), TraceEntry(30, 40)]

    def test_malformed_line_names_line_number(self, tmp_path):
        with pytest.raises(TraceError, match="line 2"):
            load_trace(write_trace(tmp_path, "1 2\nnot numbers\n3 4"))

    def test_nonpositive_rejected(self, tmp_path):
        with pytest.raises(TraceError, match="line 1"):
            load_trace(write_trace(tmp_path, "0 5"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(TraceError, match="empty"):
            load_trace(write_trace(tmp_path, "# only a comment\n"))


def kinds(batch: IterationBatch) -> set[WorkKind]:
    return {item.kind for item in batch.items}


class TestVllm:
    def test_type_separated_batches(self):
        entries = [TraceEntry(78, 483)]
        batches = form_batches(entries, Strategy.VLLM, 1, 128, 256, 12, seed=0)
        assert len(batches) == 12
        saw = set()
        for b in batches:
            assert kinds(b) in ({WorkKind.FULL_PREFILL}, {WorkKind.DECODE_STEP})
            if kinds(b) == {WorkKind.FULL_PREFILL}:
                assert len(b.items) == 1
            else:
                assert len(b.items) == 128
            saw |= kinds(b)
        assert saw == {WorkKind.FULL_PREFILL, WorkKind.DECODE_STEP}

    def test_first_batch_is_prefill(self):
        batches = form_batches([TraceEntry(4, 4)], "vllm", 2, 3, 8, 5, seed=9)
        assert kinds(batches[0]) == {WorkKind.FULL_PREFILL}
        assert len(batches[0].items) == 2


class TestOrca:
    def test_first_batch_mixes_prefill_and_decode(self):
        batches = form_batches([TraceEntry(4, 2)], Strategy.ORCA, 1, 2, 8, 4, seed=5)
        first = batches[0]
        prefills = [it for it in first.items if it.kind == WorkKind.FULL_PREFILL]
        decodes = [it for it in first.items if it.kind == WorkKind.DECODE_STEP]
        assert len(prefills) == 1 and prefills[0].new_tokens == 4
        assert prefills[0].context_len == 0
        assert decodes

    def test_batches_filled_to_decode_cap(self):
        batches = form_batches([TraceEntry(10, 10)], "orca", 2, 6, 8, 10, seed=1)
        assert all(len(b.items) == 6 for b in batches)


class TestChunkedPrefill:
    def test_ceiling_split_contexts(self):
        batches = form_batches([TraceEntry(512, 5)], "chunked", 1, 4, 256, 8, seed=2)
        chunks = [it for b in batches for it in b.items
                  if it.kind == WorkKind.PREFILL_CHUNK]
        by_request = {}
        for c in chunks:
            by_request.setdefault(c.request_id, []).append(c)
        complete = [cs for cs in by_request.values()
                    if cs[-1].context_len + cs[-1].new_tokens == 512]
        assert complete, "expected at least one fully chunked request"
        for cs in complete:
            assert [c.new_tokens for c in cs] == [256, 256]
            assert [c.context_len for c in cs] == [0, 256]

    def test_one_chunk_per_batch(self):
        batches = form_batches([TraceEntry(300, 7)], "chunked", 1, 3, 128, 9, seed=3)
        for b in batches:
            n_chunks = sum(1 for it in b.items if it.kind == WorkKind.PREFILL_CHUNK)
            assert n_chunks == 1
            assert len(b.items) == 3

    def test_chunk_sums_match_decode_context(self):
        # The first decode step of a request carries context_len equal to the
        # tokens accumulated by its chunks.
        entries = [TraceEntry(50, 3), TraceEntry(33, 2), TraceEntry(17, 4)]
        batches = form_batches(entries, "chunked", 1, 4, 16, 200, seed=7)
        chunk_sum: dict[int, int] = {}
        first_decode_ctx: dict[int, int] = {}
        for b in batches:
            for it in b.items:
                if it.kind == WorkKind.PREFILL_CHUNK:
                    assert it.context_len == chunk_sum.get(it.request_id, 0)
                    chunk_sum[it.request_id] = chunk_sum.get(it.request_id, 0) + it.new_tokens
                elif it.request_id in chunk_sum and it.request_id not in first_decode_ctx:
                    first_decode_ctx[it.request_id] = it.context_len
        checked = 0
        for rid, ctx in first_decode_ctx.items():
            assert chunk_sum[rid] == ctx
            assert ctx in {50, 33, 17}
            checked += 1
        assert checked >= 10


@settings(max_examples=30, deadline=None)
@given(
    strategy=st.sampled_from(list(Strategy)),
    seed=st.integers(0, 10_000),
    decode_bs=st.integers(1, 10),
    prefill_bs=st.integers(1, 4),
)
def test_work_item_invariants(strategy, seed, decode_bs, prefill_bs):
    entries = [TraceEntry(9, 4), TraceEntry(3, 8), TraceEntry(20, 1)]
    batches = form_batches(entries, strategy, prefill_bs, decode_bs, 4, 10, seed)
    assert len(batches) == 10
    for b in batches:
        assert b.items
        for it in b.items:
            if it.kind == WorkKind.DECODE_STEP:
                assert it.new_tokens == 1 and it.context_len >= 1
            elif it.kind == WorkKind.FULL_PREFILL:
                assert it.context_len == 0
                assert it.new_tokens in {9, 3, 20}
            else:
                assert 1 <= it.new_tokens <= 4


@given(seed=st.integers(0, 10_000), strategy=st.sampled_from(list(Strategy)))
@settings(max_examples=15, deadline=None)
def test_determinism(seed, strategy):
    entries = [TraceEntry(6, 3), TraceEntry(2, 9)]
    a = form_batches(entries, strategy, 1, 3, 4, 8, seed)
    b = form_batches(entries, strategy, 1, 3, 4, 8, seed)
    assert a == b


def test_bad_arguments():
    entries = [TraceEntry(5, 5)]
    with pytest.raises(TraceError):
        form_batches([], "vllm", 1, 1, 1, 1, 0)
    with pytest.raises(TraceError):
        form_batches(entries, "vllm", 0, 1, 1, 1, 0)
    with pytest.raises(TraceError):
        form_batches(entries, "chunked", 1, 1, 0, 1, 0)
    with pytest.raises(ValueError):
        form_batches(entries, "round-robin", 1, 1, 1, 1, 0)
