"""Intra-chiplet analytical cost model: per-layer latency/energy with tiling.

GEMM cycle counts follow a systolic-array model with +array_rows pipeline
fill per tile (drain ignored):

  WS: ceil(K/rows) * ceil(N/cols) * (M + rows)   -- weights parked per tile
  OS: ceil(M/rows) * ceil(N/cols) * (K + rows)   -- outputs parked per tile

GLB traffic follows each dataflow's reuse: WS reads every weight once per
tile and the input rows once per column tile, accumulating partial sums
across K tiles; OS streams inputs and weights once per output tile and
writes each output once. Attention nodes are costed as their two constituent
matmuls per request. Temporal tiling halves the larger of {M, N} until the
double-buffered working set fits the GLB.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import ceil

from .hw import ChipletSpec, Dataflow, EnergyCoefficients
from .modelgraph import LayerNode, OpKind


class CostError(ValueError):
    pass


class InfeasibleTileError(CostError):
    """The workload cannot fit the GLB even at single-row/column tiles."""


@dataclass(frozen=True)
class LayerCost:
    t_comp: float
    e_comp: float
    glb_read_bytes: int
    glb_write_bytes: int
    tile_count: int


def gemm_cycles(m: int, k: int, n: int, spec: ChipletSpec) -> int:
    if m < 1 or k < 1 or n < 1:
        raise CostError(f"GEMM dims must be positive, got ({m},{k},{n})")
    r, c = spec.array_rows, spec.array_cols
    if spec.dataflow is Dataflow.WS:
        return ceil(k / r) * ceil(n / c) * (m + r)
    return ceil(m / r) * ceil(n / c) * (k + r)


def _gemm_glb_traffic(m: int, k: int, n: int, bpe: int, spec: ChipletSpec) -> tuple[int, int]:
    r, c = spec.array_rows, spec.array_cols
    if spec.dataflow is Dataflow.WS:
        k_tiles, n_tiles = ceil(k / r), ceil(n / c)
        read = k * n * bpe + m * k * bpe * n_tiles + (k_tiles - 1) * m * n * bpe
        write = k_tiles * m * n * bpe
    else:
        m_tiles, n_tiles = ceil(m / r), ceil(n / c)
        read = m * k * bpe * n_tiles + k * n * bpe * m_tiles
        write = m * n * bpe
    return read, write


def _gemm_cost(m, k, n, bpe, spec, energy) -> LayerCost:
    cycles = gemm_cycles(m, k, n, spec)
    read, write = _gemm_glb_traffic(m, k, n, bpe, spec)
    e = m * k * n * energy.e_mac + (read + write) * energy.e_glb
    return LayerCost(cycles / spec.freq_hz, e, read, write, 1)


def _sum_costs(costs: list[LayerCost]) -> LayerCost:
    return LayerCost(
        t_comp=sum(c.t_comp for c in costs),
        e_comp=sum(c.e_comp for c in costs),
        glb_read_bytes=sum(c.glb_read_bytes for c in costs),
        glb_write_bytes=sum(c.glb_write_bytes for c in costs),
        tile_count=sum(c.tile_count for c in costs),
    )


def compute_cost(node: LayerNode, spec: ChipletSpec, energy: EnergyCoefficients) -> LayerCost:
    """Latency/energy of one node run whole (no GLB capacity check)."""
    bpe = node.bytes_per_element
    if node.op_kind is OpKind.GEMM:
        return _gemm_cost(node.m_rows, node.k, node.n, bpe, spec, energy)
    if node.op_kind is OpKind.MHA_SPLIT:
        if not node.mha_items:
            raise CostError("attention node with no work items")
        parts = []
        for q, ctx in node.mha_items:
            parts.append(_gemm_cost(q, node.k, ctx, bpe, spec, energy))
            parts.append(_gemm_cost(q, ctx, node.k, bpe, spec, energy))
        total = _sum_costs(parts)
        return replace(total, tile_count=1)
    elems = node.vector_elems
    if elems < 1:
        raise CostError("vector node with no elements")
    cycles = ceil(elems / spec.vector_ops_per_cycle)
    read, write = node.input_bytes, node.output_bytes
    e = elems * energy.e_vector + (read + write) * energy.e_glb
    return LayerCost(cycles / spec.freq_hz, e, read, write, 1)


def working_set_bytes(m: int, k: int, n: int, bpe: int) -> int:
    """Double-buffered GLB footprint of one (M,K,N) tile: weights + in + out."""
    return 2 * bpe * (k * n + m * k + m * n)


def _tile_dims(m: int, k: int, n: int, bpe: int, glb_bytes: int) -> list[tuple[int, int]]:
    if working_set_bytes(m, k, n, bpe) <= glb_bytes:
        return [(m, n)]
    if m >= n:
        if m == 1:
            raise InfeasibleTileError(
                f"({m},{k},{n}) exceeds GLB ({glb_bytes} B) at minimum tile")
        top = (m + 1) // 2
        return (_tile_dims(top, k, n, bpe, glb_bytes)
                + _tile_dims(m - top, k, n, bpe, glb_bytes))
    left = (n + 1) // 2
    return (_tile_dims(m, k, left, bpe, glb_bytes)
            + _tile_dims(m, k, n - left, bpe, glb_bytes))


def _gemm_sub_nodes(node: LayerNode, m: int, k: int, n: int, glb_bytes: int) -> list[LayerNode]:
    bpe = node.bytes_per_element
    subs = []
    for sm, sn in _tile_dims(m, k, n, bpe, glb_bytes):
        subs.append(LayerNode(
            layer_id=node.layer_id, op_kind=OpKind.GEMM, m_rows=sm, k=k, n=sn,
            bytes_per_element=bpe, weight_bytes=k * sn * bpe,
            input_bytes=sm * k * bpe, output_bytes=sm * sn * bpe,
        ))
    return subs


def temporal_tile(node: LayerNode, glb_bytes: int) -> list[LayerNode]:
    """Split a node into sub-nodes whose working sets fit the GLB.

    The larger of {M, N} is halved recursively; K is never split. Attention
    nodes are tiled per constituent matmul. Sub-node dims sum to the whole.
    """
    if node.op_kind is OpKind.GEMM:
        return _gemm_sub_nodes(node, node.m_rows, node.k, node.n, glb_bytes)
    if node.op_kind is OpKind.MHA_SPLIT:
        subs = []
        for q, ctx in node.mha_items:
            subs.extend(_gemm_sub_nodes(node, q, node.k, ctx, glb_bytes))
            subs.extend(_gemm_sub_nodes(node, q, ctx, node.k, glb_bytes))
        for i, sub in enumerate(subs):
            subs[i] = replace(sub, weight_bytes=0)
        return subs
    if node.op_kind is OpKind.VECTOR:
        return [node]
    raise CostError(f"cannot tile {node.op_kind}")


def cost_with_tiling(node: LayerNode, spec: ChipletSpec, energy: EnergyCoefficients) -> LayerCost:
    """Aggregate cost after temporal tiling against the chiplet's GLB."""
    if node.op_kind is OpKind.VECTOR:
        return compute_cost(node, spec, energy)
    subs = temporal_tile(node, spec.glb_bytes)
    total = _sum_costs([compute_cost(s, spec, energy) for s in subs])
    return replace(total, tile_count=len(subs))


def spatial_split(node: LayerNode, chips: list[int]) -> list[tuple[int, LayerNode]]:
    """Split a GEMM's N columns evenly across chiplets (remainder to the first).

    Every sub-node still consumes the full input; consumers gather all
    sub-outputs.
    """
    if node.op_kind is not OpKind.GEMM:
        raise CostError("spatial split applies to GEMM nodes")
    count = len(chips)
    if count < 1:
        raise CostError("need at least one chiplet")
    if node.n < count:
        raise CostError(f"cannot split N={node.n} over {count} chiplets")
    base, rem = divmod(node.n, count)
    bpe = node.bytes_per_element
    out = []
    for i, chip in enumerate(chips):
        n_i = base + (1 if i < rem else 0)
        out.append((chip, replace(
            node, n=n_i, weight_bytes=node.k * n_i * bpe,
            output_bytes=node.m_rows * n_i * bpe,
        )))
    return out
