"""Evaluation engine: data-access analysis plus execution-timeline simulation.

Data-access flags come from a single scan over the scheduling order that
tracks, per chiplet, the (micro-batch, layer) whose output it last produced
(single-slot residency). The scan decides per cell:

  * weights_resident -- true when the assigned chiplet just ran the same
    layer for another micro-batch, so weights need no reload;
  * write_out -- starts true, cleared once every successor consumed the
    output while it was still resident on a chiplet;
  * act_source per predecessor -- local / NoP-from-chiplet when the producer
    was resident at the consumer's turn, DRAM otherwise.

The timeline walk then applies, per cell,
  t_proc = max(t_comp, t_dram, t_nop)
  t_start = max(assigned chiplet's cursor, predecessors' completion times)
and accumulates energy as e_comp + e_dram + e_nop over all cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

from .hw import AcceleratorConfig, hop_count
from .layercost import cost_with_tiling
from .mapping import MappingEncoding, ScheduleOrder, schedule_order, validate
from .modelgraph import LlmArch, ModelGraph, instantiate, slice_node
from .trace import IterationBatch


class EvalError(ValueError):
    pass


LOCAL, NOP, DRAM = "local", "nop", "dram"


@dataclass(frozen=True)
class ActSource:
    kind: str  # local | nop | dram
    chip: int | None = None
    die: int | None = None


_DRAM_SOURCE = ActSource(DRAM)
_SOURCE_CACHE: dict[tuple[str, int], ActSource] = {}


def _source(kind: str, chip: int) -> ActSource:
    key = (kind, chip)
    src = _SOURCE_CACHE.get(key)
    if src is None:
        src = _SOURCE_CACHE[key] = ActSource(kind, chip=chip)
    return src


@dataclass
class AccessFlags:
    weights_resident: list[list[bool]]  # [row][layer]
    write_out: list[list[bool]]         # [row][layer]
    act_source: list[list[dict[int, ActSource]]]
    layers_prev: list[list[set[int]]]   # residual sets after the scan
    layers_next: list[list[set[int]]]


@dataclass(frozen=True)
class TimelineEntry:
    chiplet_id: int
    row: int
    layer_id: int
    t_start: float
    t_end: float
    t_comp: float
    t_dram: float
    t_nop: float


@dataclass
class Traffic:
    dram_bytes: int = 0
    nop_byte_hops: int = 0
    weight_reload_count: int = 0
    interlayer_act_dram_bytes: int = 0


@dataclass
class EvalResult:
    latency: float
    energy: float
    edp: float
    timeline: list[TimelineEntry]
    traffic: Traffic


TIMELINE_CSV_HEADER = "chiplet,row,layer,t_start,t_end,t_comp,t_dram,t_nop"


def timeline_csv_rows(result: EvalResult) -> list[str]:
    rows = [TIMELINE_CSV_HEADER]
    for e in result.timeline:
        rows.append(f"{e.chiplet_id},{e.row},{e.layer_id},{e.t_start!r},"
                    f"{e.t_end!r},{e.t_comp!r},{e.t_dram!r},{e.t_nop!r}")
    return rows


def data_access_flags(order: ScheduleOrder, graph: ModelGraph, num_chiplets: int) -> AccessFlags:
    """Scan the scheduling order and derive all per-cell data-access flags."""
    rows, m = order.rows, order.layers
    if m != graph.num_layers:
        raise EvalError("order and graph disagree on layer count")
    resident = [[False] * m for _ in range(rows)]
    write_out = [[True] * m for _ in range(rows)]
    nxt = [[set(graph.succs[l]) for l in range(m)] for _ in range(rows)]
    prv = [[set(graph.preds[l]) for l in range(m)] for _ in range(rows)]
    sources: list[list[dict[int, ActSource]]] = [
        [{} for _ in range(m)] for _ in range(rows)
    ]
    chip_state: list[tuple[int, int] | None] = [None] * num_chiplets

    for row, layer, chip in order.cells:
        if chip >= num_chiplets:
            raise EvalError(f"chip id {chip} outside accelerator with {num_chiplets}")
        cell_sources = sources[row][layer]
        remaining = prv[row][layer]
        for c in range(num_chiplets):
            held = chip_state[c]
            if held is None:
                continue
            held_row, held_layer = held
            if c == chip and held_layer == layer and held_row != row:
                resident[row][layer] = True
            if held_row == row:
                nxt[row][held_layer].discard(layer)
                if not nxt[row][held_layer]:
                    write_out[row][held_layer] = False
                if held_layer in remaining:
                    remaining.discard(held_layer)
                    cell_sources[held_layer] = _source(
                        LOCAL if c == chip else NOP, c)
        for p in remaining:
            cell_sources[p] = _DRAM_SOURCE
        chip_state[chip] = (row, layer)

    # Sinks always write their result out; mandatory flags override the scan.
    for l, succs in enumerate(graph.succs):
        force = not succs or graph.nodes[l].mandatory_writeout
        if force:
            for row in range(rows):
                write_out[row][l] = True
    return AccessFlags(
        weights_resident=resident,
        write_out=write_out,
        act_source=sources,
        layers_prev=prv,
        layers_next=nxt,
    )


class EvalContext:
    """Tables precomputed once per (graph, micro_batch, accelerator).

    Row-sliced nodes and their per-dataflow compute costs do not depend on
    the mapping, so GA fitness calls only pay for the flag scan and the
    timeline walk.
    """

    __slots__ = ("graph", "accel", "micro_batch", "rows", "row_nodes",
                 "cell_cost", "spec_index", "freq", "hops", "preds", "succs",
                 "num_layers")

    def __init__(self, graph, accel, micro_batch, rows, row_nodes, cell_cost,
                 spec_index, freq, hops):
        self.graph = graph
        self.accel = accel
        self.micro_batch = micro_batch
        self.rows = rows
        self.row_nodes = row_nodes
        self.cell_cost = cell_cost
        self.spec_index = spec_index
        self.freq = freq
        self.hops = hops
        self.preds = graph.preds
        self.succs = graph.succs
        self.num_layers = graph.num_layers

    @classmethod
    def build(cls, graph: ModelGraph, micro_batch: int, accel: AcceleratorConfig) -> "EvalContext":
        if micro_batch < 1:
            raise EvalError("micro_batch must be >= 1")
        n_items = graph.num_items
        rows = ceil(n_items / micro_batch)
        slices = [(r * micro_batch, min((r + 1) * micro_batch, n_items))
                  for r in range(rows)]
        row_nodes = [
            [slice_node(graph, node, lo, hi) for node in graph.nodes]
            for lo, hi in slices
        ]
        distinct = list(dict.fromkeys(accel.chiplets))
        spec_index = tuple(distinct.index(spec) for spec in accel.chiplets)
        energy = accel.energy
        cell_cost = [
            [
                tuple(
                    (cost.t_comp, cost.e_comp)
                    for cost in (cost_with_tiling(node, spec, energy) for spec in distinct)
                )
                for node in per_row
            ]
            for per_row in row_nodes
        ]
        n = accel.num_chiplets
        hops = [[hop_count(a, b, accel) for b in range(n)] for a in range(n)]
        freq = tuple(spec.freq_hz for spec in accel.chiplets)
        return cls(graph, accel, micro_batch, rows, row_nodes, cell_cost,
                   spec_index, freq, hops)


def layer_times(ctx: EvalContext, flags: AccessFlags, row: int, layer: int,
                chip: int, traffic: Traffic | None = None):
    """Per-cell latency/energy components: (t_comp, t_dram, t_nop, e_comp, e_dram, e_nop).

    DRAM bytes = weights (unless resident) + DRAM-sourced predecessor
    activations + own output (if written out) + KV reads/writes; graph
    sources additionally read their input from DRAM.
    """
    node = ctx.row_nodes[row][layer]
    accel = ctx.accel
    t_comp, e_comp = ctx.cell_cost[row][layer][ctx.spec_index[chip]]

    dram_bytes = node.kv_read_bytes + node.kv_write_bytes
    weight_load = node.weight_bytes > 0 and not flags.weights_resident[row][layer]
    if weight_load:
        dram_bytes += node.weight_bytes
    interlayer = 0
    t_nop = 0.0
    e_nop = 0.0
    nop_byte_hops = 0
    preds = ctx.preds[layer]
    if preds:
        cell_sources = flags.act_source[row][layer]
        for p in preds:
            src = cell_sources[p]
            if src.kind == DRAM:
                pred_bytes = ctx.row_nodes[row][p].output_bytes
                dram_bytes += pred_bytes
                interlayer += pred_bytes
            elif src.kind == NOP:
                pred_bytes = ctx.row_nodes[row][p].output_bytes
                hops = ctx.hops[src.chip][chip]
                t_nop += (pred_bytes / accel.nop_link_bw
                          + hops * accel.nop_hop_latency / ctx.freq[chip])
                e_nop += pred_bytes * hops * accel.energy.e_nop_hop
                nop_byte_hops += pred_bytes * hops
    else:
        dram_bytes += node.input_bytes
    if flags.write_out[row][layer]:
        dram_bytes += node.output_bytes
        if ctx.succs[layer]:
            interlayer += node.output_bytes

    t_dram = dram_bytes / accel.dram_bw_per_die
    e_dram = dram_bytes * accel.energy.e_dram
    if traffic is not None:
        traffic.dram_bytes += dram_bytes
        traffic.nop_byte_hops += nop_byte_hops
        traffic.weight_reload_count += 1 if weight_load else 0
        traffic.interlayer_act_dram_bytes += interlayer
    return t_comp, t_dram, t_nop, e_comp, e_dram, e_nop


def simulate_ctx(ctx: EvalContext, enc: MappingEncoding) -> EvalResult:
    """Walk the scheduling order keeping a per-chiplet availability cursor."""
    order = schedule_order(enc, ctx.num_layers, rows=ctx.rows)
    flags = data_access_flags(order, ctx.graph, ctx.accel.num_chiplets)
    cursor = [0.0] * ctx.accel.num_chiplets
    end_time = [[0.0] * ctx.num_layers for _ in range(ctx.rows)]
    energy = 0.0
    traffic = Traffic()
    timeline = []
    preds = ctx.preds
    for row, layer, chip in order.cells:
        t_comp, t_dram, t_nop, e_comp, e_dram, e_nop = layer_times(
            ctx, flags, row, layer, chip, traffic)
        start = cursor[chip]
        row_end = end_time[row]
        for p in preds[layer]:
            if row_end[p] > start:
                start = row_end[p]
        t_end = start + max(t_comp, t_dram, t_nop)
        cursor[chip] = t_end
        row_end[layer] = t_end
        energy += e_comp + e_dram + e_nop
        timeline.append(TimelineEntry(chip, row, layer, start, t_end,
                                      t_comp, t_dram, t_nop))
    latency = max(entry.t_end for entry in timeline)
    return EvalResult(latency, energy, energy * latency, timeline, traffic)


def check_encoding(enc: MappingEncoding, graph: ModelGraph, accel: AcceleratorConfig) -> list[str]:
    """Validate an encoding against a graph: shape self-consistency plus
    enough rows to cover the batch at the encoding's micro-batch size."""
    violations = validate(enc, enc.rows * enc.micro_batch_size,
                          graph.num_layers, accel.num_chiplets)
    needed = ceil(graph.num_items / enc.micro_batch_size)
    if enc.rows < needed:
        violations.append(
            f"encoding has {enc.rows} rows, batch needs {needed}")
    return violations


def simulate(graph: ModelGraph, enc: MappingEncoding, accel: AcceleratorConfig) -> EvalResult:
    violations = check_encoding(enc, graph, accel)
    if violations:
        raise EvalError("; ".join(violations))
    return simulate_ctx(EvalContext.build(graph, enc.micro_batch_size, accel), enc)


@dataclass
class ExpectedResult:
    """Arithmetic means over a batch set, with the per-batch results kept."""

    latency: float
    energy: float
    edp: float
    results: list[EvalResult] = field(default_factory=list)


def expected_over_graphs(graphs, enc: MappingEncoding, accel: AcceleratorConfig) -> ExpectedResult:
    if not graphs:
        raise EvalError("need at least one batch graph")
    m = graphs[0].num_layers
    if any(g.num_layers != m for g in graphs):
        raise EvalError("batch graphs disagree on layer count")
    results = [simulate(g, enc, accel) for g in graphs]
    n = len(results)
    return ExpectedResult(
        latency=sum(r.latency for r in results) / n,
        energy=sum(r.energy for r in results) / n,
        edp=sum(r.edp for r in results) / n,
        results=results,
    )


def evaluate_expectation(
    batches: list[IterationBatch],
    enc: MappingEncoding,
    arch: LlmArch,
    tp_degree: int,
    accel: AcceleratorConfig,
) -> ExpectedResult:
    """Mean latency/energy/EDP of a mapping over a set of iteration batches."""
    if not batches:
        raise EvalError("need at least one batch")
    graphs = [instantiate(arch, b, tp_degree) for b in batches]
    return expected_over_graphs(graphs, enc, accel)
