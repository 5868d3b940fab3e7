#!/usr/bin/env python3
"""Cross-check the three latency engines on a small config grid.

Prints solver latency, the tandem closed form (exact only for capacity-1
chains without rejection), and the simulated mean with its 95% interval.

Usage: python scripts/validate_models.py [--served N] [--seed N]
"""

import argparse
import sys

from branlab.config import ChainConfig, with_intensity
from branlab.des import simulate_chain
from branlab.markov import latency
from branlab.queueing import closed_form_latency


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--served", type=int, default=50_000)
    parser.add_argument("--seed", type=int, default=20240811)
    args = parser.parse_args()

    grid = []
    for capacity in (1, 3):
        for rho in (0.2, 0.5, 0.8):
            grid.append(
                with_intensity(
                    ChainConfig(0.1, 2.5, 0.0, 1.0, servers=1, block_capacity=capacity),
                    rho,
                )
            )
    grid.append(with_intensity(ChainConfig(0.1, 12.5, 0.0, 1.0, servers=10), 0.5))

    print(f"{'config':<28}{'solver':>10}{'closed':>10}{'simulated':>12}   95% interval")
    for index, cfg in enumerate(grid):
        solver = latency(cfg)
        closed = closed_form_latency(cfg, approximate=True).total
        sim = simulate_chain(cfg, args.served, seed=args.seed + index)
        lo, hi = sim.confidence_interval_95
        label = f"k={cfg.block_capacity} s={cfg.servers} rho={cfg.intensity:.1f}"
        flag = "" if lo <= solver <= hi else "  <-- outside interval"
        print(f"{label:<28}{solver:>10.4f}{closed:>10.4f}{sim.mean:>12.4f}   "
              f"({lo:.4f}, {hi:.4f}){flag}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
