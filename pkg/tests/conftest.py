import pytest

from lfpe import harness
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

SEED = 0
_COMMON = dict(PAPER_DEFAULTS, seed=SEED)

# The figure sweeps the acceptance and Bayes-risk tests share, at full size.
ACCEPTANCE_SWEEPS = {
    "left-strong": harness.ExperimentSpec(harness.ParticleCount(FIG2_PARTICLES), backend="strong", **_COMMON),
    "left-single": harness.ExperimentSpec(harness.ParticleCount(FIG2_PARTICLES), backend="single", **_COMMON),
    "mid": harness.ExperimentSpec(harness.SamplesPerParticle(FIXED_N, FIG2_SAMPLES), **_COMMON),
    "right": harness.ExperimentSpec(harness.TotalBudget(_budget_pairs(FIG2_BUDGETS, FIG2_BUDGET_M)), **_COMMON),
    "ale": harness.ExperimentSpec(harness.AleTolerance(FIXED_N, FIG3_EPSILONS), backend="ale", **_COMMON),
}

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    def report(criterion: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE_LINES.append(f"[criterion {criterion}] {'PASS' if passed else 'FAIL'}: {detail}")

    return report


@pytest.fixture(scope="session")
def sweep_cache():
    """Run each named acceptance sweep once per session."""
    cache: dict = {}

    def get(name, spec):
        if name not in cache:
            cache[name] = harness.run_sweep(spec)
        return cache[name]

    return get


@pytest.fixture(scope="session")
def sweep(sweep_cache):
    return lambda name: sweep_cache(name, ACCEPTANCE_SWEEPS[name])


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
