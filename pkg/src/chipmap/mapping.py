"""Mapping genome, subgraph partitioning, scheduling order, and canonical mappings.

A workload of N batch instances and M layers is a 2-D computation grid with
rows = micro-batches and columns = layers. The genome has three parts:

  micro_batch_size  -- row granularity; must divide N
  segmentation      -- M-1 bits; bit i places a segment boundary after layer i
  layer_to_chip     -- (N / micro_batch_size) x M matrix of chiplet ids

Scheduling assigns cells to chiplets segment by segment (layer order),
micro-batch rows within a segment, layers within a row's span. All-zeros
segmentation therefore yields row-wise (layer-first) order, all-ones yields
column-wise (micro-batch-first) order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class MappingEncoding:
    micro_batch_size: int
    segmentation: tuple[int, ...]
    layer_to_chip: tuple[tuple[int, ...], ...]

    @property
    def rows(self) -> int:
        return len(self.layer_to_chip)

    @property
    def layers(self) -> int:
        return len(self.layer_to_chip[0]) if self.layer_to_chip else 0


@dataclass(frozen=True)
class SubGraph:
    seg_index: int
    micro_batch_id: int
    layer_lo: int
    layer_hi: int  # exclusive


@dataclass(frozen=True)
class ScheduleOrder:
    cells: tuple[tuple[int, int, int], ...]  # (micro_batch_id, layer_id, chiplet_id)
    rows: int
    layers: int


class ParallelKind(str, Enum):
    DATA = "dp"
    MODEL = "mp"
    PIPELINE = "pp"


def validate(enc: MappingEncoding, n: int, m: int, c: int) -> list[str]:
    """Return all constraint violations (empty list means the encoding is valid)."""
    violations = []
    mb = enc.micro_batch_size
    if mb < 1:
        violations.append(f"micro_batch_size {mb} must be >= 1")
    elif n % mb:
        violations.append(f"micro_batch_size {mb} does not divide batch size {n}")
    if len(enc.segmentation) != m - 1:
        violations.append(
            f"segmentation length {len(enc.segmentation)} != M-1 = {m - 1}")
    if any(bit not in (0, 1) for bit in enc.segmentation):
        violations.append("segmentation must be 0/1 bits")
    expected_rows = n // mb if mb >= 1 and n % mb == 0 else None
    if expected_rows is not None and enc.rows != expected_rows:
        violations.append(
            f"layer_to_chip has {enc.rows} rows, expected N/mb = {expected_rows}")
    for r, row in enumerate(enc.layer_to_chip):
        if len(row) != m:
            violations.append(f"row {r} has {len(row)} columns, expected M = {m}")
            continue
        for l, chip in enumerate(row):
            if not 0 <= chip < c:
                violations.append(f"cell ({r},{l}) chip id {chip} outside [0,{c})")
    return violations


def segment_spans(segmentation: tuple[int, ...]) -> list[tuple[int, int]]:
    """Maximal layer runs between boundaries, as [lo, hi) pairs covering 0..M-1."""
    spans = []
    lo = 0
    for i, bit in enumerate(segmentation):
        if bit:
            spans.append((lo, i + 1))
            lo = i + 1
    spans.append((lo, len(segmentation) + 1))
    return spans


def partition(enc: MappingEncoding, m: int) -> list[SubGraph]:
    """All (segment, micro-batch row) subgraphs, segment-major."""
    if len(enc.segmentation) != m - 1:
        raise MappingError("segmentation length does not match layer count")
    subgraphs = []
    for s, (lo, hi) in enumerate(segment_spans(enc.segmentation)):
        for r in range(enc.rows):
            subgraphs.append(SubGraph(s, r, lo, hi))
    return subgraphs


def schedule_order(enc: MappingEncoding, m: int, rows: int | None = None) -> ScheduleOrder:
    """Deterministic assignment order over the computation grid.

    `rows` restricts the order to the first rows of the matrix (used when a
    batch underfills the encoding's batch cap); default is all rows.
    """
    if len(enc.segmentation) != m - 1:
        raise MappingError("segmentation length does not match layer count")
    total_rows = enc.rows
    if rows is None:
        rows = total_rows
    elif not 0 < rows <= total_rows:
        raise MappingError(f"rows {rows} outside 1..{total_rows}")
    matrix = enc.layer_to_chip
    cells = []
    for lo, hi in segment_spans(enc.segmentation):
        for r in range(rows):
            row = matrix[r]
            for l in range(lo, hi):
                cells.append((r, l, row[l]))
    return ScheduleOrder(tuple(cells), rows, m)


def canonical(kind: ParallelKind | str, n: int, m: int, c: int) -> MappingEncoding:
    """The fixed encodings of the three classic parallelism strategies.

    DATA:     each chiplet runs all layers of its own micro-batch.
    MODEL:    one merged row; layers round-robin over chiplets.
    PIPELINE: one layer per chiplet (round-robin), micro-batches streamed.
    """
    kind = ParallelKind(kind)
    if n < 1 or m < 1 or c < 1:
        raise MappingError("sizes must be positive")
    seg_zeros = (0,) * (m - 1)
    if kind is ParallelKind.DATA:
        if c > n or n % c:
            raise MappingError(f"data parallel needs C | N, got N={n} C={c}")
        matrix = tuple(tuple(r for _ in range(m)) for r in range(c))
        return MappingEncoding(n // c, seg_zeros, matrix)
    chip_row = tuple(l % c for l in range(m))
    if kind is ParallelKind.MODEL:
        return MappingEncoding(n, seg_zeros, (chip_row,))
    return MappingEncoding(1, (1,) * (m - 1), (chip_row,) * n)


def to_text(enc: MappingEncoding) -> str:
    seg = "".join(str(b) for b in enc.segmentation)
    rows = "/".join(",".join(str(chip) for chip in row) for row in enc.layer_to_chip)
    return f"mb={enc.micro_batch_size}; seg={seg}; map={rows}"


def from_text(text: str) -> MappingEncoding:
    try:
        fields = dict(part.strip().split("=", 1) for part in text.strip().split(";"))
        mb = int(fields["mb"])
        seg = tuple(int(ch) for ch in fields["seg"].strip())
        matrix = tuple(
            tuple(int(x) for x in row.split(","))
            for row in fields["map"].strip().split("/")
        )
    except (KeyError, ValueError) as exc:
        raise MappingError(f"unparseable mapping text: {text!r}") from exc
    return MappingEncoding(mb, seg, matrix)
