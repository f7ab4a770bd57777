"""Instantiate an LLM architecture against an iteration batch as a layer DAG.

The batch's token rows are merged into single GEMM nodes (QKV, projection,
FFN partitions), split into per-request kernels for attention, and merged
again afterwards. FFN layers can be partitioned tensor-parallel style into
sibling GEMM pairs occupying consecutive layer ids, so that segmentation can
keep or split them without special cases.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .trace import IterationBatch


class GraphError(ValueError):
    pass


class OpKind(str, Enum):
    GEMM = "gemm"
    MHA_SPLIT = "mha_split"
    VECTOR = "vector"


@dataclass(frozen=True)
class LlmArch:
    """Transformer shape constants. FFN inner width = ffn_mult * hidden."""

    num_blocks: int
    hidden: int
    num_heads: int
    head_dim: int
    ffn_mult: int = 4
    vocab: int | None = None
    bytes_per_element: int = 2

    def __post_init__(self) -> None:
        if min(self.num_blocks, self.hidden, self.num_heads, self.head_dim,
               self.ffn_mult, self.bytes_per_element) < 1:
            raise GraphError("architecture constants must be positive")
        if self.hidden != self.num_heads * self.head_dim:
            raise GraphError(
                f"hidden ({self.hidden}) != num_heads * head_dim "
                f"({self.num_heads} * {self.head_dim})"
            )


# Public GPT-3 6.7B configuration.
GPT3_6_7B = LlmArch(num_blocks=32, hidden=4096, num_heads=32, head_dim=128)

NAMED_ARCHS = {"gpt3-6.7b": GPT3_6_7B}


@dataclass(frozen=True)
class LayerNode:
    """One schedulable layer.

    GEMM:      (m_rows, k, n) matrix multiply; m_rows = merged token count.
    MHA_SPLIT: per-request attention kernels; mha_items holds one
               (q_rows, ctx_len) pair per work item, k is the hidden width.
    VECTOR:    elementwise work of m_rows * vec_width elements.
    """

    layer_id: int
    op_kind: OpKind
    m_rows: int = 0
    k: int = 0
    n: int = 0
    mha_items: tuple[tuple[int, int], ...] = ()
    vec_width: int = 0
    bytes_per_element: int = 2
    weight_bytes: int = 0
    input_bytes: int = 0
    output_bytes: int = 0
    kv_read_bytes: int = 0
    kv_write_bytes: int = 0
    mandatory_writeout: bool = False
    dram_in_id: int | None = None
    dram_out_id: int | None = None

    @property
    def gemm_dims(self) -> tuple[int, int, int]:
        return self.m_rows, self.k, self.n

    @property
    def macs(self) -> int:
        if self.op_kind is OpKind.GEMM:
            return self.m_rows * self.k * self.n
        if self.op_kind is OpKind.MHA_SPLIT:
            return sum(2 * q * ctx * self.k for q, ctx in self.mha_items)
        return 0

    @property
    def vector_elems(self) -> int:
        return self.m_rows * self.vec_width


@dataclass(frozen=True)
class ModelGraph:
    nodes: tuple[LayerNode, ...]
    preds: tuple[tuple[int, ...], ...]
    succs: tuple[tuple[int, ...], ...]
    item_tokens: tuple[int, ...]  # new_tokens per batch instance, in item order
    total_tokens: int

    @property
    def num_layers(self) -> int:
        return len(self.nodes)

    @property
    def num_items(self) -> int:
        return len(self.item_tokens)

    @property
    def total_macs(self) -> int:
        return sum(node.macs for node in self.nodes)


class _Builder:
    def __init__(self, item_tokens: tuple[int, ...]):
        self.nodes: list[LayerNode] = []
        self.preds: list[tuple[int, ...]] = []
        self.item_tokens = item_tokens

    def add(self, pred_ids: list[int], **fields) -> int:
        node_id = len(self.nodes)
        self.nodes.append(LayerNode(layer_id=node_id, **fields))
        self.preds.append(tuple(pred_ids))
        return node_id

    def finish(self) -> ModelGraph:
        succs: list[list[int]] = [[] for _ in self.nodes]
        for node_id, pred_ids in enumerate(self.preds):
            for p in pred_ids:
                succs[p].append(node_id)
        sinks = [i for i, s in enumerate(succs) if not s]
        if len(sinks) != 1:
            raise GraphError(f"graph must have exactly one sink, found {sinks}")
        return ModelGraph(
            nodes=tuple(self.nodes),
            preds=tuple(self.preds),
            succs=tuple(tuple(s) for s in succs),
            item_tokens=self.item_tokens,
            total_tokens=sum(self.item_tokens),
        )


def instantiate(arch: LlmArch, batch: IterationBatch, tp_degree: int) -> ModelGraph:
    """Expand one iteration batch into a concrete layer DAG.

    Per block, in layer order: pre-norm, merged QKV GEMM, per-request
    attention, output projection, residual norm, tp_degree (up, down) FFN
    GEMM pairs, and a partition-sum merge. KV-cache traffic is attached to
    the QKV node (write) and the attention node (read).
    """
    items = batch.items
    if not items:
        raise GraphError("cannot instantiate an empty batch")
    inner = arch.ffn_mult * arch.hidden
    if tp_degree < 1 or inner % tp_degree:
        raise GraphError(f"tp_degree {tp_degree} must divide FFN width {inner}")
    h = arch.hidden
    part = inner // tp_degree
    bpe = arch.bytes_per_element
    tokens = tuple(it.new_tokens for it in items)
    total = sum(tokens)
    mha_items = tuple((it.new_tokens, it.context_len + it.new_tokens) for it in items)
    ctx_total = sum(ctx for _, ctx in mha_items)

    b = _Builder(tokens)
    act = total * h * bpe  # a full merged activation tensor
    block_in: list[int] = []
    for _ in range(arch.num_blocks):
        norm1 = b.add(block_in, op_kind=OpKind.VECTOR, m_rows=total, vec_width=h,
                      bytes_per_element=bpe, input_bytes=act, output_bytes=act)
        qkv = b.add([norm1], op_kind=OpKind.GEMM, m_rows=total, k=h, n=3 * h,
                    bytes_per_element=bpe, weight_bytes=3 * h * h * bpe,
                    input_bytes=act, output_bytes=3 * act,
                    kv_write_bytes=2 * total * h * bpe)
        mha = b.add([qkv], op_kind=OpKind.MHA_SPLIT, m_rows=total, k=h,
                    mha_items=mha_items, bytes_per_element=bpe,
                    input_bytes=3 * act, output_bytes=act,
                    kv_read_bytes=2 * ctx_total * h * bpe)
        proj = b.add([mha], op_kind=OpKind.GEMM, m_rows=total, k=h, n=h,
                     bytes_per_element=bpe, weight_bytes=h * h * bpe,
                     input_bytes=act, output_bytes=act)
        norm2 = b.add([norm1, proj], op_kind=OpKind.VECTOR, m_rows=total,
                      vec_width=h, bytes_per_element=bpe,
                      input_bytes=act, output_bytes=act)
        downs = []
        for _ in range(tp_degree):
            up = b.add([norm2], op_kind=OpKind.GEMM, m_rows=total, k=h, n=part,
                       bytes_per_element=bpe, weight_bytes=h * part * bpe,
                       input_bytes=act, output_bytes=total * part * bpe)
            down = b.add([up], op_kind=OpKind.GEMM, m_rows=total, k=part, n=h,
                         bytes_per_element=bpe, weight_bytes=part * h * bpe,
                         input_bytes=total * part * bpe, output_bytes=act)
            downs.append(down)
        merge = b.add(downs + [norm2], op_kind=OpKind.VECTOR, m_rows=total,
                      vec_width=h, bytes_per_element=bpe,
                      input_bytes=act, output_bytes=act)
        block_in = [merge]
    return b.finish()


def toy_model(
    num_gemms: int,
    instance_rows,
    dim: int = 16,
    bytes_per_element: int = 2,
) -> ModelGraph:
    """A linear chain of square GEMM layers over a merged variable-size batch.

    instance_rows gives each batch instance's row count; the chain's GEMMs
    all run at m_rows = sum(instance_rows) after merging.
    """
    if num_gemms < 1 or dim < 1:
        raise GraphError("num_gemms and dim must be >= 1")
    rows = tuple(int(r) for r in instance_rows)
    if not rows or any(r < 1 for r in rows):
        raise GraphError("instance_rows must be non-empty positive counts")
    total = sum(rows)
    bpe = bytes_per_element
    act = total * dim * bpe
    b = _Builder(rows)
    prev: list[int] = []
    for _ in range(num_gemms):
        node = b.add(prev, op_kind=OpKind.GEMM, m_rows=total, k=dim, n=dim,
                     bytes_per_element=bpe, weight_bytes=dim * dim * bpe,
                     input_bytes=act, output_bytes=act)
        prev = [node]
    return b.finish()


def slice_node(graph: ModelGraph, node: LayerNode, item_lo: int, item_hi: int) -> LayerNode:
    """Restrict a merged node to the work of batch instances [item_lo, item_hi)."""
    toks = sum(graph.item_tokens[item_lo:item_hi])
    if toks <= 0:
        raise GraphError("empty item slice")
    bpe = node.bytes_per_element
    if node.op_kind is OpKind.GEMM:
        kv_write = node.kv_write_bytes
        if kv_write:
            if kv_write % graph.total_tokens:
                raise GraphError("kv_write_bytes must be per-token uniform")
            kv_write = kv_write // graph.total_tokens * toks
        return replace(node, m_rows=toks, input_bytes=toks * node.k * bpe,
                       output_bytes=toks * node.n * bpe, kv_write_bytes=kv_write)
    if node.op_kind is OpKind.MHA_SPLIT:
        sliced = node.mha_items[item_lo:item_hi]
        kv_read = 2 * node.k * bpe * sum(ctx for _, ctx in sliced)
        return replace(node, m_rows=toks, mha_items=sliced,
                       input_bytes=3 * toks * node.k * bpe,
                       output_bytes=toks * node.k * bpe, kv_read_bytes=kv_read)
    width = node.vec_width * bpe
    return replace(node, m_rows=toks, input_bytes=toks * width,
                   output_bytes=toks * width)
