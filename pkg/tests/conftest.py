import random

import pytest

from chipmap import hw, mapping, modelgraph


@pytest.fixture
def accel_2x2():
    return hw.uniform_accel(2, 2)


@pytest.fixture
def toy_graph():
    """The 4-GEMM, 8-instance, variable-row-count toy workload."""
    return modelgraph.toy_model(4, [5, 9, 3, 12, 7, 4, 10, 6], dim=32)


def random_dag(num_layers: int, rng: random.Random) -> tuple[tuple, tuple]:
    """Random DAG (preds, succs) with edges only forward and a single sink."""
    preds = [[] for _ in range(num_layers)]
    for node in range(1, num_layers):
        for p in range(node):
            if rng.random() < 0.4:
                preds[node].append(p)
        if not preds[node] and rng.random() < 0.8:
            preds[node].append(rng.randrange(node))
    succs = [[] for _ in range(num_layers)]
    for node, ps in enumerate(preds):
        for p in ps:
            succs[p].append(node)
    # funnel stray sinks into the last node so exactly one sink remains
    for node in range(num_layers - 1):
        if not succs[node]:
            succs[node].append(num_layers - 1)
            preds[num_layers - 1].append(node)
    return tuple(tuple(p) for p in preds), tuple(tuple(s) for s in succs)


def graph_with_topology(preds, succs, item_tokens=(1,), dim=8):
    """Wrap an arbitrary topology in a ModelGraph of unit GEMM nodes."""
    total = sum(item_tokens)
    nodes = []
    for layer_id in range(len(preds)):
        nodes.append(modelgraph.LayerNode(
            layer_id=layer_id, op_kind=modelgraph.OpKind.GEMM,
            m_rows=total, k=dim, n=dim, bytes_per_element=2,
            weight_bytes=dim * dim * 2, input_bytes=total * dim * 2,
            output_bytes=total * dim * 2))
    return modelgraph.ModelGraph(
        nodes=tuple(nodes), preds=preds, succs=succs,
        item_tokens=tuple(item_tokens), total_tokens=total)


def random_valid_encoding(n, m, c, rng: random.Random) -> mapping.MappingEncoding:
    divisors = [d for d in range(1, n + 1) if n % d == 0]
    mb = rng.choice(divisors)
    seg = tuple(rng.randint(0, 1) for _ in range(m - 1))
    matrix = tuple(tuple(rng.randrange(c) for _ in range(m)) for _ in range(n // mb))
    return mapping.MappingEncoding(mb, seg, matrix)
