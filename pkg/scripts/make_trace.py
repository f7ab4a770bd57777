#!/usr/bin/env python3
"""Synthesize a sequence-length trace file.

Lengths are drawn lognormally around the requested averages, clamped to >= 1,
so short-input/long-output (conversational) or long-input/short-output
(summarization) scenarios are both easy to produce.
"""

import argparse
import math
import random


def sample_length(rng: random.Random, mean: float, sigma: float) -> int:
    mu = math.log(mean) - sigma * sigma / 2.0
    return max(1, round(rng.lognormvariate(mu, sigma)))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--requests", type=int, default=64)
    parser.add_argument("--avg-input", type=float, default=78.0)
    parser.add_argument("--avg-output", type=float, default=483.0)
    parser.add_argument("--sigma", type=float, default=0.8,
                        help="lognormal shape parameter")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="-", help="output path, '-' for stdout")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    lines = [f"# synthetic trace: {args.requests} requests, "
             f"avg in/out {args.avg_input:g}/{args.avg_output:g}, seed {args.seed}"]
    for _ in range(args.requests):
        lines.append(f"{sample_length(rng, args.avg_input, args.sigma)} "
                     f"{sample_length(rng, args.avg_output, args.sigma)}")
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        print(text, end="")
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
