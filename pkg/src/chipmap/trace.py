"""Sequence-length traces and iteration-batch formation under serving strategies.

A trace is a list of (input_len, output_len) request sizes. Batch formation
simulates a request pool fed by sampling the trace with replacement and emits
per-iteration work batches the way the chosen serving strategy would:

  vllm     -- type-separated: prefill-only batches preempt decode-only batches
  orca     -- mixed: new full prefills co-scheduled with in-flight decodes
  chunked  -- one prefill chunk per iteration interleaved with decodes

When the in-flight pool is too small to fill a decode batch, fresh requests
are sampled and enter mid-stream at a uniformly random position, so batches
are always full and shaped by the trace's length distribution.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class TraceError(ValueError):
    pass


class Strategy(str, Enum):
    VLLM = "vllm"
    ORCA = "orca"
    CHUNKED_PREFILL = "chunked"


class WorkKind(str, Enum):
    FULL_PREFILL = "full_prefill"
    PREFILL_CHUNK = "prefill_chunk"
    DECODE_STEP = "decode_step"


@dataclass(frozen=True)
class TraceEntry:
    input_len: int
    output_len: int

    def __post_init__(self) -> None:
        if self.input_len < 1 or self.output_len < 1:
            raise TraceError("input_len and output_len must be >= 1")


@dataclass(frozen=True)
class WorkItem:
    """One request's contribution to one iteration.

    new_tokens:  tokens processed this iteration.
    context_len: tokens already in the KV cache before this iteration.
    """

    request_id: int
    kind: WorkKind
    new_tokens: int
    context_len: int


@dataclass(frozen=True)
class IterationBatch:
    items: tuple[WorkItem, ...]
    strategy_tag: Strategy


def load_trace(path) -> list[TraceEntry]:
    """Parse a trace file: one "input_len output_len" pair per line.

    Fields may be whitespace- or comma-separated; lines starting with '#'
    and blank lines are skipped.
    """
    text = Path(path).read_text()
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        if len(fields) != 2:
            raise TraceError(f"line {lineno}: expected two integers, got {raw!r}")
        try:
            in_len, out_len = int(fields[0]), int(fields[1])
        except ValueError:
            raise TraceError(f"line {lineno}: expected two integers, got {raw!r}") from None
        if in_len < 1 or out_len < 1:
            raise TraceError(f"line {lineno}: lengths must be >= 1, got {raw!r}")
        entries.append(TraceEntry(in_len, out_len))
    if not entries:
        raise TraceError(f"empty trace: {path}")
    return entries


class _InFlight:
    """A request in its decode phase. pos counts tokens already in the KV cache."""

    __slots__ = ("request_id", "input_len", "total_len", "pos")

    def __init__(self, request_id: int, input_len: int, total_len: int, pos: int):
        self.request_id = request_id
        self.input_len = input_len
        self.total_len = total_len
        self.pos = pos

    @property
    def done(self) -> bool:
        return self.pos >= self.total_len


class _Pool:
    """Request pool sampled with replacement from the trace."""

    def __init__(self, entries: list[TraceEntry], rng: random.Random):
        self.entries = entries
        self.rng = rng
        self.next_id = 0
        self.inflight: list[_InFlight] = []

    def take_id(self) -> int:
        rid = self.next_id
        self.next_id += 1
        return rid

    def sample(self) -> TraceEntry:
        return self.entries[self.rng.randrange(len(self.entries))]

    def admit(self, entry: TraceEntry) -> _InFlight:
        """A request that just finished its prefill joins the decode pool."""
        req = _InFlight(self.take_id(), entry.input_len,
                        entry.input_len + entry.output_len, entry.input_len)
        self.inflight.append(req)
        return req

    def synthesize(self) -> _InFlight:
        """A fresh request entering mid-stream at a uniform in-flight position."""
        entry = self.sample()
        total = entry.input_len + entry.output_len
        req = _InFlight(self.take_id(), entry.input_len, total,
                        self.rng.randint(1, total - 1))
        self.inflight.append(req)
        return req

    def decode_steps(
        self, count: int, exclude: frozenset | set = frozenset()
    ) -> tuple[list[WorkItem], int]:
        """Advance `count` in-flight requests by one token each.

        Tops the pool up with synthesized requests when it runs short.
        Returns the emitted decode items and the number of requests that
        finished; finished requests leave the pool.
        """
        candidates = [r for r in self.inflight if r.request_id not in exclude]
        while len(candidates) < count:
            candidates.append(self.synthesize())
        items = []
        for req in candidates[:count]:
            items.append(WorkItem(req.request_id, WorkKind.DECODE_STEP, 1, req.pos))
            req.pos += 1
        finished = sum(1 for r in self.inflight if r.done)
        self.inflight = [r for r in self.inflight if not r.done]
        return items, finished


def _vllm_batches(pool: _Pool, prefill_bs: int, decode_bs: int, num_batches: int):
    batches = []
    waiting = prefill_bs  # arrivals queued at t=0; completions queue more
    while len(batches) < num_batches:
        if waiting > 0:
            items = []
            for _ in range(prefill_bs):
                entry = pool.sample()
                rid = pool.admit(entry).request_id
                items.append(WorkItem(rid, WorkKind.FULL_PREFILL, entry.input_len, 0))
            waiting = max(0, waiting - prefill_bs)
        else:
            items, finished = pool.decode_steps(decode_bs)
            waiting += finished
        batches.append(IterationBatch(tuple(items), Strategy.VLLM))
    return batches


def _orca_batches(pool: _Pool, prefill_bs: int, decode_bs: int, num_batches: int):
    batches = []
    while len(batches) < num_batches:
        items = []
        fresh: set[int] = set()
        admit = min(prefill_bs, max(0, decode_bs - len(pool.inflight)))
        for _ in range(admit):
            entry = pool.sample()
            req = pool.admit(entry)
            fresh.add(req.request_id)
            items.append(WorkItem(req.request_id, WorkKind.FULL_PREFILL, entry.input_len, 0))
        need = decode_bs - len(items)
        if need > 0:
            decode_items, _ = pool.decode_steps(need, exclude=fresh)
            items.extend(decode_items)
        batches.append(IterationBatch(tuple(items), Strategy.ORCA))
    return batches


def _chunked_batches(pool: _Pool, decode_bs: int, chunk_budget: int, num_batches: int):
    batches = []
    current = None  # (request_id, entry, tokens_done)
    while len(batches) < num_batches:
        if current is None:
            current = [pool.take_id(), pool.sample(), 0]
        rid, entry, done = current
        step = min(chunk_budget, entry.input_len - done)
        items = [WorkItem(rid, WorkKind.PREFILL_CHUNK, step, done)]
        current[2] = done + step
        fresh: set[int] = set()
        if current[2] >= entry.input_len:
            req = _InFlight(rid, entry.input_len,
                            entry.input_len + entry.output_len, entry.input_len)
            pool.inflight.append(req)
            fresh.add(rid)
            current = None
        need = decode_bs - len(items)
        if need > 0:
            decode_items, _ = pool.decode_steps(need, exclude=fresh)
            items.extend(decode_items)
        batches.append(IterationBatch(tuple(items), Strategy.CHUNKED_PREFILL))
    return batches


def form_batches(
    entries: list[TraceEntry],
    strategy: Strategy | str,
    prefill_bs: int,
    decode_bs: int,
    chunk_budget: int,
    num_batches: int,
    seed: int,
) -> list[IterationBatch]:
    """Emit `num_batches` iteration batches; deterministic for a given seed."""
    strategy = Strategy(strategy)
    if not entries:
        raise TraceError("cannot form batches from an empty trace")
    if prefill_bs < 1 or decode_bs < 1 or num_batches < 1:
        raise TraceError("batch caps and num_batches must be >= 1")
    if strategy is Strategy.CHUNKED_PREFILL and chunk_budget < 1:
        raise TraceError("chunk_budget must be >= 1")
    pool = _Pool(entries, random.Random(seed))
    if strategy is Strategy.VLLM:
        return _vllm_batches(pool, prefill_bs, decode_bs, num_batches)
    if strategy is Strategy.ORCA:
        return _orca_batches(pool, prefill_bs, decode_bs, num_batches)
    return _chunked_batches(pool, decode_bs, chunk_budget, num_batches)
