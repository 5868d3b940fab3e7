#!/usr/bin/env python3
"""Run every bundled preset sweep and drop one CSV per preset.

Usage: python scripts/run_presets.py [outdir] [--seed N] [--jobs N]
"""

import argparse
import sys
import time
from pathlib import Path

from branlab.scenarios import list_presets, run_preset


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("outdir", nargs="?", default="results")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, description in list_presets():
        start = time.perf_counter()
        summary = run_preset(
            name, outdir / f"{name}.csv", seed=args.seed, jobs=args.jobs
        )
        print(
            f"{name}: {summary.points_ok}/{summary.points_total} points "
            f"-> {summary.out_path} ({time.perf_counter() - start:.1f}s)  # {description}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
