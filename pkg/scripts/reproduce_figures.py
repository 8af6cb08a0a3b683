#!/usr/bin/env python3
"""Run every figure preset at full size and print MSE tables with fitted slopes.

Usage: python scripts/reproduce_figures.py [--seed S] [--trials T] [--out DIR]

Writes one CSV per sweep into DIR (default ./results) and prints a summary.
"""

import argparse
import os
import time

from lfpe.cli import (
    FIG2_BUDGET_M,
    FIG2_BUDGETS,
    FIG2_PARTICLES,
    FIG2_SAMPLES,
    FIG3_EPSILONS,
    FIXED_N,
    PAPER_DEFAULTS,
    _budget_pairs,
)
from lfpe.harness import (
    AleTolerance,
    ExperimentSpec,
    ParticleCount,
    SamplesPerParticle,
    TotalBudget,
    fit_loglog_slope,
    presaturation,
    run_sweep,
    to_csv,
)


def sweeps(seed, trials):
    common = dict(PAPER_DEFAULTS, seed=seed, trials=trials)
    return {
        "fig2_left_strong": ExperimentSpec(ParticleCount(FIG2_PARTICLES), backend="strong", **common),
        "fig2_left_single": ExperimentSpec(ParticleCount(FIG2_PARTICLES), backend="single", **common),
        "fig2_mid": ExperimentSpec(SamplesPerParticle(FIXED_N, FIG2_SAMPLES), **common),
        "fig2_right": ExperimentSpec(TotalBudget(_budget_pairs(FIG2_BUDGETS, FIG2_BUDGET_M)), **common),
        "fig3": ExperimentSpec(AleTolerance(FIXED_N, FIG3_EPSILONS), **common),
    }


def x_value(name, row):
    if name == "fig2_mid":
        return row.m
    if name == "fig3":
        return row.epsilon
    return row.n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", nargs="*")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for name, spec in sweeps(args.seed, args.trials).items():
        if args.only and name not in args.only:
            continue
        t0 = time.time()
        result = run_sweep(spec)
        with open(os.path.join(args.out, f"{name}.csv"), "w") as fh:
            fh.write(to_csv(result))
        print(f"== {name} ({time.time() - t0:.0f}s), bound {result.rows[0].bound:.4g}")
        for r in result.rows:
            print(f"  {r.sweep_value:>10}  mse {r.mean_mse:.4g} +- {r.stderr:.2g}  "
                  f"iqr [{r.q25:.3g}, {r.q75:.3g}]  calls {r.mean_calls:.3g}")
        if name == "fig2_right":
            # Budget tiers are compared within a tier, not along a slope.
            continue
        pts = [(x_value(name, r), r.mean_mse) for r in result.rows]
        pre = presaturation(pts, result.rows[0].bound)
        slope_all = fit_loglog_slope(pts) if len(pts) >= 3 else float("nan")
        slope_pre = fit_loglog_slope(pre) if len(pre) >= 3 else float("nan")
        print(f"  slope(all) {slope_all:.3f}  slope(mse > 2x bound, {len(pre)} pts) {slope_pre:.3f}", flush=True)


if __name__ == "__main__":
    main()
