"""Repeated-trial experiments over parameter sweeps, with MSE aggregation and export.

Every trial draws a true efficiency from the prior, simulates ``N`` detector
outcomes at it, runs one estimator, and records the squared error of the
posterior mean. The truth and data for trial ``t`` depend only on
``(seed, t)``, so every sweep point sees the same data sets; the engine's
own randomness is keyed by ``(seed, point, t)``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from lfpe.core import RngStream, UniformPrior
from lfpe.likelihood_free import (
    ALE,
    DEFAULT_MAX_SAMPLES,
    DEFAULT_ZERO_POSTERIOR_RETRIES,
    BackendConfig,
    BackendKind,
    FixedM,
    SingleSample,
    run_lfpe,
)
from lfpe.models import PhotodetectorModel, asymptotic_mse_bound
from lfpe.smc import ResampleConfig, RunEvents, run_strong

log = logging.getLogger(__name__)

CSV_COLUMNS = ("sweep_value", "mean_mse", "q25", "q75", "mean_calls", "bound")

BACKENDS = ("strong", "single", "fixed", "ale")

_DATA_STREAM = 0
_ENGINE_STREAM = 1


class TrialError(RuntimeError):
    """A trial failed; the message carries its sweep coordinates."""


@dataclass(frozen=True)
class ParticleCount:
    values: tuple[int, ...]


@dataclass(frozen=True)
class SamplesPerParticle:
    n: int
    values: tuple[int, ...]


@dataclass(frozen=True)
class TotalBudget:
    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class AleTolerance:
    n: int
    values: tuple[float, ...]


Sweep = Union[ParticleCount, SamplesPerParticle, TotalBudget, AleTolerance]


@dataclass(frozen=True)
class SweepPoint:
    label: str
    n: int
    backend: str
    m: int = 1
    epsilon: float | None = None


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep of repeated trials on the photodetector model.

    ``backend`` applies to :class:`ParticleCount` sweeps; the other sweep
    kinds fix it (``fixed`` for m and budget sweeps, ``ale`` for tolerance
    sweeps). ``m`` and ``epsilon`` are the backend settings used by a
    particle-count sweep with the ``fixed`` or ``ale`` backend.
    """

    sweep: Sweep
    alpha: float = 0.9
    beta: float = 0.05
    measurements: int = 1000
    trials: int = 100
    backend: str = "single"
    m: int = 1
    epsilon: float = 0.01
    gamma: float = 1.0
    max_samples: int = DEFAULT_MAX_SAMPLES
    zero_posterior_retries: int = DEFAULT_ZERO_POSTERIOR_RETRIES
    resample: ResampleConfig = field(default_factory=ResampleConfig)
    seed: int = 0
    fixed_p: float | None = None

    def __post_init__(self):
        model = PhotodetectorModel(self.alpha, self.beta)
        model.require_identifiable()
        if self.measurements < 1:
            raise ValueError(f"measurements must be >= 1, got {self.measurements}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.fixed_p is not None and not 0.0 <= self.fixed_p <= 1.0:
            raise ValueError(f"fixed_p must lie in [0, 1], got {self.fixed_p}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        # constructing the backends validates m, epsilon, gamma and the budget
        for point in self.points():
            if point.n < 1:
                raise ValueError(f"particle count must be >= 1, got {point.n}")
            backend_for(self, point)

    @property
    def model(self) -> PhotodetectorModel:
        return PhotodetectorModel(self.alpha, self.beta)

    def points(self) -> list[SweepPoint]:
        sw = self.sweep
        if isinstance(sw, ParticleCount):
            _require_values(sw.values)
            return [
                SweepPoint(str(n), n, self.backend, self.m, self.epsilon if self.backend == "ale" else None)
                for n in sw.values
            ]
        if isinstance(sw, SamplesPerParticle):
            _require_values(sw.values)
            return [SweepPoint(str(m), sw.n, "fixed", m) for m in sw.values]
        if isinstance(sw, TotalBudget):
            _require_values(sw.pairs)
            return [SweepPoint(f"{n}x{m}", n, "fixed", m) for n, m in sw.pairs]
        if isinstance(sw, AleTolerance):
            _require_values(sw.values)
            return [SweepPoint(repr(float(e)), sw.n, "ale", epsilon=float(e)) for e in sw.values]
        raise TypeError(f"unknown sweep {sw!r}")


def _require_values(values: Sequence) -> None:
    if len(values) == 0:
        raise ValueError("sweep needs at least one value")


def backend_for(spec: ExperimentSpec, point: SweepPoint) -> BackendConfig | None:
    """Backend configuration for a sweep point; ``None`` means exact likelihoods."""
    kind: BackendKind
    if point.backend == "strong":
        return None
    if point.backend == "single":
        kind = SingleSample()
    elif point.backend == "fixed":
        kind = FixedM(point.m)
    else:
        kind = ALE(point.epsilon, spec.gamma, spec.max_samples)
    return BackendConfig(kind, spec.zero_posterior_retries)


@dataclass(frozen=True)
class TrialRecord:
    point: int
    trial: int
    true_p: float
    estimate: float
    squared_error: float
    posterior_variance: float
    simulator_calls: int
    measurements_used: int
    resample_events: int
    zero_posterior_events: int


@dataclass(frozen=True)
class SweepRow:
    sweep_value: str
    n: int
    m: int
    epsilon: float | None
    mean_mse: float
    stderr: float
    q25: float
    median: float
    q75: float
    mean_calls: float
    bound: float
    trials: int


@dataclass(frozen=True)
class SweepResult:
    spec: ExperimentSpec
    rows: tuple[SweepRow, ...]
    records: tuple[TrialRecord, ...]

    def row(self, label: str) -> SweepRow:
        for r in self.rows:
            if r.sweep_value == label:
                return r
        raise KeyError(label)


def trial_data(spec: ExperimentSpec, trial_index: int) -> tuple[float, np.ndarray]:
    """True efficiency and simulated outcomes for one trial (shared by all sweep points)."""
    gen = RngStream(spec.seed, (_DATA_STREAM, trial_index)).generator()
    p = gen.uniform() if spec.fixed_p is None else spec.fixed_p
    data = spec.model.weak_interface().sample_many(np.array([p]), spec.measurements, gen)
    return float(p), data


def run_trial(spec: ExperimentSpec, point_index: int, trial_index: int) -> TrialRecord:
    point = spec.points()[point_index]
    try:
        true_p, data = trial_data(spec, trial_index)
        rng = RngStream(spec.seed, (_ENGINE_STREAM, point_index, trial_index))
        backend = backend_for(spec, point)
        events = RunEvents()
        prior = UniformPrior()
        if backend is None:
            summary = run_strong(
                spec.model.strong_interface(), prior, data, point.n, spec.resample, rng, events
            )
            calls = 0
        else:
            summary, counter = run_lfpe(
                spec.model.weak_interface(), prior, data, point.n, backend, spec.resample, rng, events
            )
            calls = counter.total_simulator_calls
    except Exception as exc:
        raise TrialError(f"sweep point {point.label!r} (#{point_index}), trial {trial_index}: {exc}") from exc
    estimate = float(summary.mean[0])
    return TrialRecord(
        point=point_index,
        trial=trial_index,
        true_p=true_p,
        estimate=estimate,
        squared_error=(estimate - true_p) ** 2,
        posterior_variance=float(summary.covariance[0, 0]),
        simulator_calls=calls,
        measurements_used=len(data),
        resample_events=events.resamples,
        zero_posterior_events=events.zero_posteriors,
    )


def _run_item(args: tuple[ExperimentSpec, int, int]) -> TrialRecord:
    return run_trial(*args)


def run_sweep(spec: ExperimentSpec, jobs: int = 1) -> SweepResult:
    """Run every (point, trial) pair and aggregate per point.

    Results do not depend on ``jobs``: each item carries its own streams and
    aggregation happens in index order.
    """
    points = spec.points()
    items = [(spec, i, t) for i in range(len(points)) for t in range(spec.trials)]
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_item, items, chunksize=max(1, len(items) // (4 * jobs))))
    else:
        records = [_run_item(it) for it in items]
    bound = asymptotic_mse_bound(spec.model, spec.measurements)
    rows = []
    for i, point in enumerate(points):
        recs = [r for r in records if r.point == i]
        se = np.array([r.squared_error for r in recs])
        q25, median, q75 = np.percentile(se, [25, 50, 75])
        rows.append(
            SweepRow(
                sweep_value=point.label,
                n=point.n,
                m=point.m,
                epsilon=point.epsilon,
                mean_mse=float(se.mean()),
                stderr=float(se.std(ddof=1) / np.sqrt(se.size)) if se.size > 1 else float("nan"),
                q25=float(q25),
                median=float(median),
                q75=float(q75),
                mean_calls=float(np.mean([r.simulator_calls for r in recs])),
                bound=bound,
                trials=len(recs),
            )
        )
    return SweepResult(spec, tuple(rows), tuple(records))


def fit_loglog_slope(points: Iterable[tuple[float, float]]) -> float:
    """Least-squares slope of ``log(y)`` against ``log(x)``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError(f"need at least 3 (x, y) points, got {pts.shape[0] if pts.ndim == 2 else 0}")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("slope fit needs finite positive x and y")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    lx = lx - lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))


def presaturation(points: Iterable[tuple[float, float]], bound: float, factor: float = 2.0) -> list[tuple[float, float]]:
    """Keep the points whose MSE is still above ``factor * bound``."""
    return [(x, y) for x, y in points if y > factor * bound]


def _fmt(x: float) -> str:
    return repr(float(x))


def to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in result.rows:
        writer.writerow([r.sweep_value, _fmt(r.mean_mse), _fmt(r.q25), _fmt(r.q75), _fmt(r.mean_calls), _fmt(r.bound)])
    return buf.getvalue()


def spec_to_dict(spec: ExperimentSpec) -> dict:
    d = asdict(spec)
    d["sweep"] = {"kind": type(spec.sweep).__name__, **asdict(spec.sweep)}
    return d


def to_json(result: SweepResult, raw: bool = False) -> str:
    payload = {
        "spec": spec_to_dict(result.spec),
        "columns": list(CSV_COLUMNS),
        "rows": [asdict(r) for r in result.rows],
    }
    if raw:
        payload["records"] = [asdict(r) for r in result.records]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
