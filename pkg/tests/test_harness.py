import csv
import io
import json

import numpy as np
import pytest

from lfpe.harness import (
    CSV_COLUMNS,
    AleTolerance,
    ExperimentSpec,
    ParticleCount,
    SamplesPerParticle,
    TotalBudget,
    TrialError,
    fit_loglog_slope,
    presaturation,
    run_sweep,
    run_trial,
    to_csv,
    to_json,
    trial_data,
)
from lfpe.models import PhotodetectorModel, asymptotic_mse_bound


def small(sweep=ParticleCount((5, 20)), **kw):
    base = dict(measurements=50, trials=4, seed=3)
    base.update(kw)
    return ExperimentSpec(sweep, **base)


def test_slope_examples():
    xs = np.array([1.0, 3.0, 10.0, 30.0, 100.0])
    assert fit_loglog_slope(zip(xs, 1 / xs)) == pytest.approx(-1.0, abs=1e-12)
    assert fit_loglog_slope(zip(xs, np.full(5, 0.3))) == pytest.approx(0.0, abs=1e-12)
    assert fit_loglog_slope(zip(xs, 5 / xs**2)) == pytest.approx(-2.0, abs=1e-12)


@pytest.mark.parametrize("pts", [[(1, 1), (2, 2)], [(1, 1), (2, 0), (3, 1)], [(-1, 1), (2, 2), (3, 3)]])
def test_slope_rejects_bad_input(pts):
    with pytest.raises(ValueError):
        fit_loglog_slope(pts)


def test_presaturation_cut():
    assert presaturation([(1, 0.5), (2, 0.2), (3, 0.1)], bound=0.1) == [(1, 0.5)]


def test_trial_is_deterministic():
    spec = small(backend="single")
    assert run_trial(spec, 1, 2) == run_trial(spec, 1, 2)


def test_trial_data_shared_across_points():
    spec = small()
    res = run_sweep(spec)
    for t in range(spec.trials):
        p0 = [r.true_p for r in res.records if r.trial == t]
        assert len(set(p0)) == 1
        assert p0[0] == trial_data(spec, t)[0]


def test_fixed_truth_mode():
    spec = small(fixed_p=0.25)
    assert all(r.true_p == 0.25 for r in run_sweep(spec).records)


def test_squared_error_exact():
    for r in run_sweep(small()).records:
        assert r.squared_error == (r.estimate - r.true_p) ** 2
        assert r.measurements_used == 50


def test_single_point_single_trial_reduces_to_run_trial():
    spec = small(ParticleCount((7,)), trials=1)
    res = run_sweep(spec)
    rec = run_trial(spec, 0, 0)
    assert res.records == (rec,)
    assert res.rows[0].mean_mse == rec.squared_error


def test_strong_backend_has_no_zero_posteriors():
    res = run_sweep(small(backend="strong", trials=6))
    assert all(r.zero_posterior_events == 0 and r.simulator_calls == 0 for r in res.records)


def test_call_accounting_per_backend():
    spec = small(ParticleCount((8,)), backend="single", zero_posterior_retries=0)
    assert run_sweep(spec).rows[0].mean_calls == 50 * 8
    spec = small(SamplesPerParticle(8, (3,)), zero_posterior_retries=0)
    assert run_sweep(spec).rows[0].mean_calls == 50 * 8 * 3
    spec = small(AleTolerance(8, (0.05,)))
    assert run_sweep(spec).rows[0].mean_calls >= 50 * 8


def test_rows_carry_bound_and_ordered_quartiles():
    spec = small(TotalBudget(((10, 1), (5, 2))))
    res = run_sweep(spec)
    bound = asymptotic_mse_bound(PhotodetectorModel(0.9, 0.05), 50)
    for row in res.rows:
        assert row.bound == bound
        assert row.q25 <= row.median <= row.q75
    assert [r.sweep_value for r in res.rows] == ["10x1", "5x2"]


def test_results_independent_of_worker_count():
    spec = small(trials=3)
    assert to_csv(run_sweep(spec, jobs=1)) == to_csv(run_sweep(spec, jobs=2))


def test_csv_layout():
    text = to_csv(run_sweep(small()))
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r[0] for r in rows[1:]] == ["5", "20"]


def test_json_raw_records():
    res = run_sweep(small())
    payload = json.loads(to_json(res, raw=True))
    assert len(payload["records"]) == 8
    assert payload["spec"]["sweep"]["kind"] == "ParticleCount"
    assert "records" not in json.loads(to_json(res))


@pytest.mark.parametrize(
    "kw",
    [
        dict(alpha=0.5, beta=0.5),
        dict(trials=0),
        dict(measurements=0),
        dict(backend="magic"),
        dict(sweep=ParticleCount(())),
        dict(sweep=SamplesPerParticle(10, (0,))),
        dict(sweep=AleTolerance(10, (-0.1,))),
        dict(sweep=ParticleCount((0,))),
    ],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        small(**kw)


def test_trial_errors_carry_coordinates(monkeypatch):
    import lfpe.harness as harness

    def boom(*a, **k):
        raise RuntimeError("engine exploded")

    monkeypatch.setattr(harness, "run_lfpe", boom)
    with pytest.raises(TrialError, match=r"trial 0"):
        run_sweep(small(trials=1))


@pytest.mark.slow
def test_noise_free_strong_near_bound():
    spec = ExperimentSpec(ParticleCount((1000,)), alpha=0.0, beta=0.0, measurements=10**4,
                          trials=100, backend="strong", seed=11)
    res = run_sweep(spec)
    limit = 10 / (6 * 10**4)
    assert sum(r.squared_error < limit for r in res.records) >= 90


@pytest.mark.slow
def test_doubling_trials_is_stable():
    a = run_sweep(ExperimentSpec(ParticleCount((100,)), measurements=200, trials=100, backend="strong", seed=5))
    b = run_sweep(ExperimentSpec(ParticleCount((100,)), measurements=200, trials=200, backend="strong", seed=6))
    ra, rb = a.rows[0], b.rows[0]
    assert abs(ra.mean_mse - rb.mean_mse) < 3 * np.hypot(ra.stderr, rb.stderr)
