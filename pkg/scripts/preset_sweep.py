#!/usr/bin/env python3
"""Run one experiment config under each hardware preset (WS, OS, HE) and
print the normalized validation-EDP comparison."""

import argparse
from pathlib import Path

from chipmap import cli

PRESETS = ("WS", "OS", "HE")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config", help="YAML experiment config")
    parser.add_argument("--root", default="out/preset_sweep",
                        help="parent directory for the per-preset runs")
    args = parser.parse_args()

    root = Path(args.root)
    run_dirs = []
    for preset in PRESETS:
        out_dir = root / preset
        status = cli.main(["run", args.config, "--preset", preset,
                           "--output-dir", str(out_dir)])
        if status != 0:
            return status
        run_dirs.append(str(out_dir))
    return cli.main(["compare", *run_dirs, "--out", str(root / "compare.csv")])


if __name__ == "__main__":
    raise SystemExit(main())
