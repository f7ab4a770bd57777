#!/usr/bin/env python3
"""Search the 4-GEMM variable-size toy workload and compare against the
canonical data/model/pipeline-parallel mappings on a 2x2 chiplet grid."""

import argparse

from chipmap import hw
from chipmap.evaluator import simulate
from chipmap.mapping import canonical, to_text
from chipmap.modelgraph import toy_model
from chipmap.search import GaConfig, grid_search

INSTANCE_ROWS = [5, 9, 3, 12, 7, 4, 10, 6]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--population", type=int, default=120)
    parser.add_argument("--generations", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--convergence-csv", help="write the best-EDP series here")
    args = parser.parse_args()

    graph = toy_model(4, INSTANCE_ROWS, dim=32)
    accel = hw.uniform_accel(2, 2)
    n, m, c = len(INSTANCE_ROWS), graph.num_layers, accel.num_chiplets

    print(f"toy workload: {n} instances x {m} GEMMs on {c} chiplets")
    for kind in ("dp", "mp", "pp"):
        res = simulate(graph, canonical(kind, n, m, c), accel)
        print(f"  {kind.upper():>2} canonical: EDP {res.edp:.4e} J*s "
              f"(latency {res.latency:.3e} s, energy {res.energy:.3e} J)")

    ga = GaConfig(population=args.population, generations=args.generations,
                  seed=args.seed)
    grid = grid_search([1, 2, 4, 8], [1], lambda tp: [graph], accel, ga)
    print(f"  GA best:      EDP {grid.best.fitness:.4e} J*s at "
          f"mb={grid.best_micro_batch}")
    print(f"  encoding: {to_text(grid.best.encoding)}")

    if args.convergence_csv:
        lines = ["mb,tp,generation,best_edp"]
        for entry in grid.table:
            for gen, edp in enumerate(entry.history):
                lines.append(f"{entry.micro_batch},{entry.tensor_parallel},{gen},{edp!r}")
        with open(args.convergence_csv, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"  convergence series -> {args.convergence_csv}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
