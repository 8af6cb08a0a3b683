"""Command-line entry point: figure presets and custom sweeps.

Exit codes: 0 on success, 2 for configuration errors, 3 when a run fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace

from lfpe.harness import (
    AleTolerance,
    ExperimentSpec,
    ParticleCount,
    SamplesPerParticle,
    TotalBudget,
    run_sweep,
    spec_to_dict,
    to_csv,
    to_json,
)
from lfpe.likelihood_free import default_ale_tolerance
from lfpe.smc import ResampleConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

SEED_ENV = "LFPE_SEED"

FIG2_PARTICLES = (10, 32, 100, 316, 1000)
FIG2_SAMPLES = (1, 3, 10, 32, 100)
FIG2_BUDGETS = (100, 1000, 10000)
FIG2_BUDGET_M = (1, 10, 100)
FIG3_EPSILONS = (0.3, 0.1, 0.03, 0.01, 0.003)
FIXED_N = 100

# values the figures state: alpha, beta, N, 100 trials, gamma = 1.
# Grids, prior, and resampler settings are not stated and are our choices.
PAPER_DEFAULTS = dict(alpha=0.9, beta=0.05, measurements=1000, trials=100, gamma=1.0)


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: config error: {message}\n")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lfpe", description="Likelihood-free SMC experiments on the noisy photodetector.")
    parser.add_argument("preset", choices=["fig2-left", "fig2-mid", "fig2-right", "fig3", "custom"])
    parser.add_argument("--sweep", choices=["particles", "samples", "budget", "ale"], default="particles",
                        help="sweep kind for the custom preset")
    parser.add_argument("--alpha", type=float, help="dark-count probability")
    parser.add_argument("--beta", type=float, help="loss probability")
    parser.add_argument("-N", "--measurements", type=int, help="measurements per trial")
    parser.add_argument("-n", "--particles", type=_ints, help="comma-separated particle counts")
    parser.add_argument("-m", "--samples", type=_ints, help="comma-separated simulator calls per particle")
    parser.add_argument("--budgets", type=_ints, help="comma-separated total budgets n*m (budget sweep)")
    parser.add_argument("--epsilon", type=_floats, help="comma-separated ALE tolerances")
    parser.add_argument("--gamma", type=float, help="add-gamma hedging constant")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int, help=f"master seed (default: ${SEED_ENV} or 0)")
    parser.add_argument("--backend", choices=["strong", "single", "fixed", "ale"],
                        help="estimator for particle-count sweeps")
    parser.add_argument("--ess-threshold", type=float, help="resample when ESS < this fraction of n")
    parser.add_argument("--liu-west-a", type=float, help="Liu-West shrinkage a")
    parser.add_argument("--max-samples", type=int, help="ALE per-particle sample cap")
    parser.add_argument("--retries", type=int, help="redraws after an all-zero update")
    parser.add_argument("--fixed-p", type=float, help="debug: use this true p in every trial")
    parser.add_argument("-o", "--output", help="output file (default: stdout)")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")
    parser.add_argument("--raw", action="store_true", help="include per-trial records (json only)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    parser.add_argument("--dry-run", action="store_true", help="print the resolved spec and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _budget_pairs(budgets, ms) -> tuple[tuple[int, int], ...]:
    pairs = []
    for b in budgets:
        for m in ms:
            if b % m == 0 and b // m >= 1:
                pairs.append((b // m, m))
    return tuple(pairs)


def resolve_spec(args: argparse.Namespace) -> ExperimentSpec:
    """Turn parsed flags into a validated spec; raises ConfigError naming the bad field."""
    base = dict(PAPER_DEFAULTS)
    for name in ("alpha", "beta", "measurements", "gamma", "trials"):
        if getattr(args, name) is not None:
            base[name] = getattr(args, name)

    seed = args.seed
    if seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            seed = int(env) if env else 0
        except ValueError:
            raise ConfigError(f"seed: ${SEED_ENV}={env!r} is not an integer") from None

    preset = args.preset
    n_fixed = args.particles[0] if args.particles else FIXED_N
    backend = args.backend or "single"
    kind = {"fig2-left": "particles", "fig2-mid": "samples", "fig2-right": "budget", "fig3": "ale"}.get(
        preset, args.sweep
    )
    if kind == "particles":
        sweep = ParticleCount(args.particles or FIG2_PARTICLES)
    elif kind == "samples":
        sweep = SamplesPerParticle(n_fixed, args.samples or FIG2_SAMPLES)
    elif kind == "budget":
        pairs = _budget_pairs(args.budgets or FIG2_BUDGETS, args.samples or FIG2_BUDGET_M)
        sweep = TotalBudget(pairs)
    else:
        if args.epsilon:
            eps = args.epsilon
        elif preset == "fig3":
            eps = FIG3_EPSILONS
        else:
            eps = (default_ale_tolerance(base["measurements"], n_fixed),)
        sweep = AleTolerance(n_fixed, eps)

    extra = {}
    if args.samples and kind == "particles":
        extra["m"] = args.samples[0]
    if args.epsilon and kind == "particles":
        extra["epsilon"] = args.epsilon[0]
    if args.max_samples is not None:
        extra["max_samples"] = args.max_samples
    if args.retries is not None:
        extra["zero_posterior_retries"] = args.retries
    if args.fixed_p is not None:
        extra["fixed_p"] = args.fixed_p

    try:
        resample = ResampleConfig()
        if args.ess_threshold is not None:
            resample = replace(resample, ess_threshold_fraction=args.ess_threshold)
        if args.liu_west_a is not None:
            resample = replace(resample, liu_west_a=args.liu_west_a)
        return ExperimentSpec(sweep=sweep, backend=backend, seed=seed, resample=resample, **base, **extra)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".lfpe-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_and_run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        if args.jobs < 1:
            raise ConfigError(f"jobs: must be >= 1, got {args.jobs}")
        if args.raw and args.format != "json":
            raise ConfigError("raw: per-trial records need --format json")
        spec = resolve_spec(args)
    except ConfigError as exc:
        print(f"lfpe: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.dry_run:
        resolved = spec_to_dict(spec)
        resolved["points"] = [p.__dict__ for p in spec.points()]
        n_ref = spec.points()[0].n
        resolved["suggested_epsilon"] = default_ale_tolerance(spec.measurements, n_ref)
        print(json.dumps(resolved, indent=2, sort_keys=True))
        return EXIT_OK

    try:
        result = run_sweep(spec, jobs=args.jobs)
        text = to_json(result, raw=args.raw) if args.format == "json" else to_csv(result)
        if args.output:
            _write_atomic(args.output, text)
        else:
            sys.stdout.write(text)
    except Exception as exc:
        print(f"lfpe: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(parse_and_run())
