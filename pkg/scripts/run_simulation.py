#!/usr/bin/env python3
"""Risk curves on the ground-truth simulation.

Runs the temperature-miscalibration simulation over many seeds, evaluates
the empirical risk of the parametric candidate family on a temperature
grid, and writes plot-ready mean/std curves to CSV. The curve should
bottom out at theta = 1, the value that inverts the simulated
miscalibration exactly.

Usage:
    python scripts/run_simulation.py --seeds 100 --out curve.csv
"""

import argparse
import csv

import numpy as np

from calrisk.risk import empirical_risk
from calrisk.sim import DEFAULT_THETAS, SimConfig, SimModel, simulate


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--d", type=int, default=5)
    parser.add_argument("--alpha", type=float, default=0.04)
    parser.add_argument("--seeds", type=int, default=100)
    parser.add_argument("--out", type=str, default="curve.csv")
    args = parser.parse_args()

    thetas = list(DEFAULT_THETAS)
    curves = np.empty((args.seeds, len(thetas)))
    argmins = []
    for seed in range(args.seeds):
        sim = simulate(SimConfig(n=args.n, d=args.d, alpha=args.alpha, seed=seed))
        curves[seed] = [
            empirical_risk(SimModel(t), sim.dataset).value for t in thetas
        ]
        argmins.append(thetas[int(np.argmin(curves[seed]))])

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "risk_mean", "risk_std"])
        for i, theta in enumerate(thetas):
            writer.writerow([theta, curves[:, i].mean(), curves[:, i].std(ddof=1)])

    mean_best = thetas[int(np.argmin(curves.mean(axis=0)))]
    window = sum(0.9 <= t <= 1.1 for t in argmins)
    print(f"wrote {args.out}")
    print(f"mean-curve argmin: theta = {mean_best}")
    print(f"per-seed argmin in [0.9, 1.1]: {window}/{args.seeds}")


if __name__ == "__main__":
    main()
