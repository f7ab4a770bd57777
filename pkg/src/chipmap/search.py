"""Genetic-algorithm mapping search plus the outer (micro_batch, TP) grid.

Crossover inherits segmentation bit-wise and layer_to_chip subgraph-wise
(partitioned by the child's segmentation). Mutation applies one segmentation
operator (bit-flip or bit-swap) and one layer_to_chip operator per child; the
layer_to_chip operator category is drawn from a phase-dependent schedule that
favours graph-level moves early and layer-level moves late. Elitism keeps the
best individual, so the best-EDP series never increases. Candidate canonical
mappings (data/model/pipeline parallel, adapted to the run's micro-batch
size) seed the initial population.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from operator import attrgetter
from typing import Callable, Sequence

from .evaluator import EvalContext, simulate_ctx
from .hw import AcceleratorConfig
from .mapping import MappingEncoding, segment_spans
from .modelgraph import ModelGraph


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class Individual:
    encoding: MappingEncoding
    fitness: float  # mean EDP, lower is better
    age: int = 0


@dataclass(frozen=True)
class GaConfig:
    population: int = 120
    generations: int = 200
    tournament_size: int = 4
    crossover_rate: float = 0.9
    # Mutation-category schedule endpoints (layer weight is the complement).
    graph_weight_start: float = 0.5
    graph_weight_end: float = 0.1
    subgraph_weight: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise SearchError("population must be >= 2")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise SearchError("crossover_rate must be in [0, 1]")
        if self.generations < 0:
            raise SearchError("generations must be >= 0")


@dataclass
class MappingProblem:
    graphs: Sequence[ModelGraph]
    accel: AcceleratorConfig
    micro_batch: int
    restricted: bool = False


@dataclass
class GaResult:
    best: Individual
    history: list[float]  # best EDP after init and after each generation
    evaluations: int


_FITNESS = attrgetter("fitness")
_CATEGORY_OPS = ((1, 2, 3), (4, 5), (6, 7))  # layer, subgraph, graph level


def tournament_select(pop: Sequence[Individual], k: int, rng: random.Random) -> Individual:
    """Sample k individuals without replacement, return the lowest EDP one."""
    if not pop:
        raise SearchError("empty population")
    if not 1 <= k <= len(pop):
        raise SearchError(f"tournament size {k} outside 1..{len(pop)}")
    return min(rng.sample(list(pop), k), key=_FITNESS)


def crossover(a: MappingEncoding, b: MappingEncoding, rng: random.Random) -> MappingEncoding:
    """Bit-level segmentation crossover, then subgraph-level map inheritance."""
    if (a.micro_batch_size != b.micro_batch_size
            or len(a.segmentation) != len(b.segmentation)
            or a.rows != b.rows or a.layers != b.layers):
        raise SearchError("crossover parents must share (N, M, mb) shape")
    seg = tuple(
        a.segmentation[i] if rng.random() < 0.5 else b.segmentation[i]
        for i in range(len(a.segmentation))
    )
    spans = segment_spans(seg)
    matrix = []
    for ra, rb in zip(a.layer_to_chip, b.layer_to_chip):
        row: list[int] = []
        for lo, hi in spans:
            src = ra if rng.random() < 0.5 else rb
            row.extend(src[lo:hi])
        matrix.append(tuple(row))
    return MappingEncoding(a.micro_batch_size, seg, tuple(matrix))


def bit_flip(segmentation: tuple[int, ...], idx: int) -> tuple[int, ...]:
    seg = list(segmentation)
    seg[idx] ^= 1
    return tuple(seg)


def bit_swap(segmentation: tuple[int, ...], idx: int, towards_next: bool) -> tuple[int, ...]:
    """Swap bit idx with a neighbour; boundaries fall back to the one that exists."""
    last = len(segmentation) - 1
    if idx == 0:
        other = 1
    elif idx == last:
        other = idx - 1
    else:
        other = idx + 1 if towards_next else idx - 1
    seg = list(segmentation)
    seg[idx], seg[other] = seg[other], seg[idx]
    return tuple(seg)


def mutate_segmentation(enc: MappingEncoding, rng: random.Random) -> MappingEncoding:
    seg = enc.segmentation
    if not seg:
        return enc
    if rng.random() < 0.5:
        seg = bit_flip(seg, rng.randrange(len(seg)))
    elif len(seg) > 1:
        seg = bit_swap(seg, rng.randrange(len(seg)), rng.random() < 0.5)
    return replace(enc, segmentation=seg)


def mutate_layer_to_chip(
    enc: MappingEncoding, op_id: int, rng: random.Random, num_chips: int
) -> MappingEncoding:
    """Apply one of the seven layer_to_chip operators; degenerate picks are identity."""
    rows, layers = enc.rows, enc.layers
    grid = [list(row) for row in enc.layer_to_chip]
    if op_id == 1:
        r, l = rng.randrange(rows), rng.randrange(layers)
        grid[r][l] = rng.randrange(num_chips)
    elif op_id == 2:
        if layers > 1:
            r, l = rng.randrange(rows), rng.randrange(layers)
            l2 = 1 if l == 0 else (l - 1 if l == layers - 1
                                   else (l + 1 if rng.random() < 0.5 else l - 1))
            grid[r][l], grid[r][l2] = grid[r][l2], grid[r][l]
    elif op_id == 3:
        if rows > 1:
            r, l = rng.randrange(rows), rng.randrange(layers)
            r2 = 1 if r == 0 else (r - 1 if r == rows - 1
                                   else (r + 1 if rng.random() < 0.5 else r - 1))
            grid[r][l], grid[r2][l] = grid[r2][l], grid[r][l]
    elif op_id == 4:
        spans = segment_spans(enc.segmentation)
        r = rng.randrange(rows)
        lo, hi = spans[rng.randrange(len(spans))]
        cells = grid[r][lo:hi]
        rng.shuffle(cells)
        grid[r][lo:hi] = cells
    elif op_id == 5:
        spans = segment_spans(enc.segmentation)
        r = rng.randrange(rows)
        lo, hi = spans[rng.randrange(len(spans))]
        grid[r][lo:hi] = [rng.randrange(num_chips) for _ in range(hi - lo)]
    elif op_id == 6:
        spans = segment_spans(enc.segmentation)
        if len(spans) > 1:
            s1, s2 = rng.sample(range(len(spans)), 2)
            (lo1, hi1), (lo2, hi2) = spans[s1], spans[s2]
            w1, w2 = hi1 - lo1, hi2 - lo2
            for row in grid:
                c1, c2 = row[lo1:hi1], row[lo2:hi2]
                # Unequal widths exchange values cyclically to keep spans intact.
                row[lo1:hi1] = [c2[i % w2] for i in range(w1)]
                row[lo2:hi2] = [c1[i % w1] for i in range(w2)]
    elif op_id == 7:
        if rows > 1:
            r1, r2 = rng.sample(range(rows), 2)
            grid[r1], grid[r2] = grid[r2], grid[r1]
    else:
        raise SearchError(f"unknown mutation operator {op_id}")
    return replace(enc, layer_to_chip=tuple(tuple(row) for row in grid))


def mutation_schedule(
    generation: int, total: int, ga: GaConfig | None = None
) -> tuple[float, float, float]:
    """(layer, subgraph, graph) category weights for a generation; sums to 1."""
    if total < 1 or not 0 <= generation < total:
        raise SearchError("generation must satisfy 0 <= generation < total")
    gs = ga.graph_weight_start if ga else 0.5
    ge = ga.graph_weight_end if ga else 0.1
    sub = ga.subgraph_weight if ga else 0.3
    t = generation / (total - 1) if total > 1 else 0.0
    graph_w = gs + (ge - gs) * t
    layer_w = 1.0 - sub - graph_w
    norm = layer_w + sub + graph_w
    return layer_w / norm, sub / norm, graph_w / norm


def random_encoding(
    rows: int, layers: int, num_chips: int, micro_batch: int, rng: random.Random
) -> MappingEncoding:
    seg = tuple(rng.randint(0, 1) for _ in range(layers - 1))
    matrix = tuple(
        tuple(rng.randrange(num_chips) for _ in range(layers)) for _ in range(rows)
    )
    return MappingEncoding(micro_batch, seg, matrix)


def seed_encodings(rows: int, layers: int, num_chips: int, micro_batch: int) -> list[MappingEncoding]:
    """Data/model/pipeline-parallel style encodings adapted to this row count."""
    zeros = (0,) * (layers - 1)
    chip_row = tuple(l % num_chips for l in range(layers))
    dp = MappingEncoding(
        micro_batch, zeros,
        tuple(tuple(r % num_chips for _ in range(layers)) for r in range(rows)))
    mp = MappingEncoding(micro_batch, zeros, (chip_row,) * rows)
    pp = MappingEncoding(micro_batch, (1,) * (layers - 1), (chip_row,) * rows)
    return [dp, mp, pp]


def _instance_blocks(num_chips: int, rows: int) -> list[tuple[int, ...]]:
    count = min(rows, num_chips)
    base, rem = divmod(num_chips, count)
    blocks = []
    start = 0
    for i in range(count):
        size = base + (1 if i < rem else 0)
        blocks.append(tuple(range(start, start + size)))
        start += size
    return blocks


def restrict_to_blocks(enc: MappingEncoding, num_chips: int) -> MappingEncoding:
    """Project an encoding into the per-instance-partitioned baseline space.

    The chiplet grid is carved into contiguous blocks, one per micro-batch
    row (wrapping when rows exceed chiplets); every cell of a row is remapped
    into its row's block. This emulates baselines that treat each batch
    instance as a separate model confined to its own accelerator partition.
    """
    blocks = _instance_blocks(num_chips, enc.rows)
    matrix = []
    for r, row in enumerate(enc.layer_to_chip):
        block = blocks[r % len(blocks)]
        matrix.append(tuple(block[chip % len(block)] for chip in row))
    return replace(enc, layer_to_chip=tuple(matrix))


def run_ga(
    problem: MappingProblem,
    ga: GaConfig,
    eval_map: Callable | None = None,
) -> GaResult:
    """Evolve mappings for a fixed micro_batch; deterministic for a given seed.

    eval_map may be a parallel map (fitness is pure); results are reduced in
    stable order so parallel and serial runs match bit for bit.
    """
    emap = eval_map if eval_map is not None else map
    graphs = list(problem.graphs)
    if not graphs:
        raise SearchError("need at least one batch graph")
    m = graphs[0].num_layers
    if any(g.num_layers != m for g in graphs):
        raise SearchError("batch graphs disagree on layer count")
    accel = problem.accel
    num_chips = accel.num_chiplets
    mb = problem.micro_batch
    contexts = [EvalContext.build(g, mb, accel) for g in graphs]
    rows = max(ctx.rows for ctx in contexts)

    def fitness(enc: MappingEncoding) -> float:
        return sum(simulate_ctx(ctx, enc).edp for ctx in contexts) / len(contexts)

    def finish(enc: MappingEncoding) -> MappingEncoding:
        return restrict_to_blocks(enc, num_chips) if problem.restricted else enc

    rng = random.Random(ga.seed)
    encodings = [finish(e) for e in seed_encodings(rows, m, num_chips, mb)]
    encodings = encodings[: ga.population]
    while len(encodings) < ga.population:
        encodings.append(finish(random_encoding(rows, m, num_chips, mb, rng)))
    fits = list(emap(fitness, encodings))
    population = [Individual(e, f, 0) for e, f in zip(encodings, fits)]
    best = min(population, key=_FITNESS)
    history = [best.fitness]
    evaluations = len(population)
    k = min(max(2, ga.tournament_size), ga.population)

    for gen in range(ga.generations):
        weights = mutation_schedule(gen, ga.generations, ga)
        children = []
        for _ in range(ga.population - 1):
            pa = tournament_select(population, k, rng)
            pb = tournament_select(population, k, rng)
            if rng.random() < ga.crossover_rate:
                child = crossover(pa.encoding, pb.encoding, rng)
            else:
                child = pa.encoding
            child = mutate_segmentation(child, rng)
            category = rng.choices((0, 1, 2), weights=weights)[0]
            op_id = rng.choice(_CATEGORY_OPS[category])
            child = finish(mutate_layer_to_chip(child, op_id, rng, num_chips))
            children.append(child)
        fits = list(emap(fitness, children))
        evaluations += len(children)
        population = [best] + [Individual(e, f, gen + 1) for e, f in zip(children, fits)]
        best = min(population, key=_FITNESS)
        history.append(best.fitness)
    return GaResult(best=best, history=history, evaluations=evaluations)


@dataclass(frozen=True)
class GridEntry:
    micro_batch: int
    tensor_parallel: int
    edp: float
    history: tuple[float, ...]


@dataclass
class GridSearchResult:
    best: Individual
    best_micro_batch: int
    best_tensor_parallel: int
    table: list[GridEntry]


def grid_search(
    mb_candidates: Sequence[int],
    tp_candidates: Sequence[int],
    graphs_for_tp: Callable[[int], Sequence[ModelGraph]],
    accel: AcceleratorConfig,
    ga: GaConfig,
    restricted: bool = False,
    eval_map: Callable | None = None,
) -> GridSearchResult:
    """Run one GA per feasible (micro_batch, tensor_parallel) pair.

    Micro-batch candidates must divide the scenario's batch-instance cap.
    The restricted baseline mode confines the search to per-instance
    granularity (micro_batch 1) within per-instance chip blocks.
    """
    if not mb_candidates or not tp_candidates:
        raise SearchError("candidate lists must be non-empty")
    table: list[GridEntry] = []
    best = None
    for tp in tp_candidates:
        graphs = list(graphs_for_tp(tp))
        if not graphs:
            raise SearchError(f"no batch graphs for tp={tp}")
        cap = max(g.num_items for g in graphs)
        if restricted:
            mbs = [1]
        else:
            mbs = sorted({mb for mb in mb_candidates if mb >= 1 and cap % mb == 0})
        for mb in mbs:
            result = run_ga(MappingProblem(graphs, accel, mb, restricted), ga, eval_map)
            table.append(GridEntry(mb, tp, result.best.fitness, tuple(result.history)))
            if best is None or result.best.fitness < best[0].fitness:
                best = (result.best, mb, tp)
    if best is None:
        raise SearchError("no feasible (micro_batch, tensor_parallel) candidates")
    return GridSearchResult(best=best[0], best_micro_batch=best[1],
                            best_tensor_parallel=best[2], table=table)
