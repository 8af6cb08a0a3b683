"""Weight updates driven by a weak (sample-only) simulator.

Three backends estimate ``Pr(datum | x_k)`` for every particle:

* single sample: one simulated outcome, likelihood 1 on a match and 0 otherwise;
* fixed ``m``: the match frequency among ``m`` simulated outcomes;
* adaptive (ALE): draw until the Beta posterior standard deviation of the
  match probability falls below ``epsilon``, then report the add-gamma
  estimate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from lfpe.core import (
    BudgetExhausted,
    ParticleCloud,
    Prior,
    RngStream,
    WeakModel,
    ZeroPosterior,
    as_generator,
)
from lfpe.smc import (
    LIKELIHOOD_STREAM,
    PosteriorSummary,
    ResampleConfig,
    RunEvents,
    posterior_summary,
    run_filter,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_SAMPLES = 10**6
DEFAULT_ZERO_POSTERIOR_RETRIES = 10


@dataclass(frozen=True)
class SingleSample:
    pass


@dataclass(frozen=True)
class FixedM:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")


@dataclass(frozen=True)
class ALE:
    epsilon: float
    gamma: float = 1.0
    max_samples: int = DEFAULT_MAX_SAMPLES

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if self.max_samples < 0:
            raise ValueError(f"max_samples must be non-negative, got {self.max_samples!r}")


BackendKind = Union[SingleSample, FixedM, ALE]


@dataclass(frozen=True)
class BackendConfig:
    kind: BackendKind = SingleSample()
    zero_posterior_retries: int = DEFAULT_ZERO_POSTERIOR_RETRIES

    def __post_init__(self):
        if self.zero_posterior_retries < 0:
            raise ValueError("zero_posterior_retries must be non-negative")


@dataclass
class CallCounter:
    total_simulator_calls: int = 0

    def add(self, calls: int) -> None:
        if calls < 0:
            raise ValueError("call counts only grow")
        self.total_simulator_calls += int(calls)


def default_ale_tolerance(n_measurements: int, n_particles: int) -> float:
    """Suggested ALE tolerance ``1/N + 1/n``; beyond it the likelihood error stops mattering."""
    return 1.0 / n_measurements + 1.0 / n_particles


def add_gamma_estimate(k, m, gamma: float = 1.0):
    """Hedged frequency ``(k + gamma) / (m + 2 gamma)``; vectorizes over ``k`` and ``m``."""
    k, m = _check_counts(k, m)
    est = (k + gamma) / (m + 2.0 * gamma)
    return float(est) if np.ndim(est) == 0 else est


def beta_posterior_variance(k, m, gamma: float = 1.0):
    """Variance of the Beta(k + gamma, m - k + gamma) posterior on the match probability."""
    k, m = _check_counts(k, m)
    var = _beta_var(k, m, gamma)
    return float(var) if np.ndim(var) == 0 else var


def _beta_var(k, m, gamma):
    total = m + 2.0 * gamma
    return (k + gamma) * (m - k + gamma) / (total * total * (total + 1.0))


def _check_counts(k, m):
    k = np.asarray(k, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(k < 0) or np.any(k > m):
        raise ValueError(f"need 0 <= k <= m, got k={k}, m={m}")
    return k, m


def single_sample_likelihoods(
    model: WeakModel,
    cloud: ParticleCloud,
    datum: int,
    rng: RngStream | np.random.Generator,
    counter: CallCounter,
) -> np.ndarray:
    """1.0 where the particle's one simulated outcome equals ``datum``, else 0.0."""
    return fixed_m_likelihoods(model, cloud, datum, 1, rng, counter)


def fixed_m_likelihoods(
    model: WeakModel,
    cloud: ParticleCloud,
    datum: int,
    m: int,
    rng: RngStream | np.random.Generator,
    counter: CallCounter,
) -> np.ndarray:
    """Fraction of ``m`` simulated outcomes per particle that equal ``datum``."""
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    hits = model.match_counts(cloud.positions, datum, int(m), as_generator(rng))
    counter.add(cloud.n * int(m))
    return hits / float(m)


@dataclass(frozen=True)
class AleDraws:
    """Per-particle outcome of the adaptive stopping rule."""

    matches: np.ndarray
    samples: np.ndarray
    last_matched: np.ndarray


# geometric grid of look-ahead lengths for the skip search below
_LOOKAHEAD = np.unique(np.round(1.25 ** np.arange(0, 93)).astype(np.int64))


def ale_draw(
    model: WeakModel,
    positions: np.ndarray,
    datum: int,
    epsilon: float,
    gamma: float,
    max_samples: int,
    rng: np.random.Generator,
) -> AleDraws:
    """Run the sequential stopping rule for every particle.

    Each particle draws one outcome at a time and stops as soon as
    ``sqrt(beta_posterior_variance(k, m, gamma)) < epsilon`` or ``m`` reaches
    ``max_samples``. At least one outcome is always drawn.

    Draws are batched without changing the stopping time: from state
    ``(k, m)`` the variance after ``i`` more draws is concave in the number of
    matches, so over every reachable ``k'`` it is smallest at the two
    extremes (all matches, all misses). Each extreme, viewed as a function of
    ``i``, first rises then falls, so it stays at or above ``epsilon**2`` on
    ``[1, j]`` iff it does at ``i = 1`` and ``i = j``. Any such ``j`` draws can
    therefore be taken in one call to :meth:`WeakModel.match_counts` with no
    chance of missing a stop.
    """
    if max_samples < 1:
        raise BudgetExhausted("ALE needs max_samples >= 1")
    positions = np.atleast_2d(positions)
    n = positions.shape[0]
    eps2 = epsilon * epsilon
    k = np.zeros(n, dtype=np.int64)
    m = np.zeros(n, dtype=np.int64)
    last = np.zeros(n, dtype=bool)
    grid = _LOOKAHEAD[_LOOKAHEAD < max_samples]
    gridf = grid.astype(float)
    # compact state for still-sampling particles
    active = np.arange(n)
    pos = positions
    ka = np.zeros(n)
    ma = np.zeros(n)
    while active.size:
        ahead = ma[:, None] + gridf
        extreme_min = np.minimum(
            _beta_var(ka[:, None] + gridf, ahead, gamma),
            _beta_var(ka[:, None], ahead, gamma),
        )
        ok = extreme_min >= eps2
        # column 0 is i = 1; keep the largest grid j with [1, j] safe, then draw j + 1
        ok &= ok[:, :1]
        any_ok = ok[:, 0]
        idx = ok.shape[1] - 1 - np.argmax(ok[:, ::-1], axis=1)
        step = np.where(any_ok, grid[idx] + 1, 1)
        step = np.minimum(step, max_samples - ma.astype(np.int64))
        hits = model.match_counts(pos, datum, step, rng)
        # the final draw of a batch matched with probability hits/step (exchangeability)
        last_hit = rng.random(active.size) * step < hits
        ka += hits
        ma += step
        done = (_beta_var(ka, ma, gamma) < eps2) | (ma >= max_samples)
        if done.any():
            fin = active[done]
            k[fin] = ka[done]
            m[fin] = ma[done]
            last[fin] = last_hit[done]
            keep = ~done
            active, pos, ka, ma = active[keep], pos[keep], ka[keep], ma[keep]
    return AleDraws(k, m, last)


def ale_likelihoods(
    model: WeakModel,
    cloud: ParticleCloud,
    datum: int,
    epsilon: float,
    gamma: float,
    max_samples: int,
    rng: RngStream | np.random.Generator,
    counter: CallCounter,
    events: RunEvents | None = None,
) -> np.ndarray:
    """Add-gamma likelihood estimate per particle after adaptive sampling."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    draws = ale_draw(model, cloud.positions, datum, epsilon, gamma, max_samples, as_generator(rng))
    counter.add(int(draws.samples.sum()))
    if events is not None:
        capped = draws.samples >= max_samples
        if capped.any():
            capped_var = beta_posterior_variance(draws.matches[capped], draws.samples[capped], gamma)
            events.budget_hits += int(np.count_nonzero(capped_var >= epsilon**2))
    return add_gamma_estimate(draws.matches, draws.samples, gamma)


def run_lfpe(
    model: WeakModel,
    prior: Prior,
    data: Sequence[int],
    n: int,
    backend: BackendConfig = BackendConfig(),
    cfg: ResampleConfig = ResampleConfig(),
    rng: RngStream = RngStream(0),
    events: RunEvents | None = None,
) -> tuple[PosteriorSummary, CallCounter]:
    """SMC where each likelihood vector comes from the configured weak-simulator backend.

    An all-zero update is redrawn up to ``backend.zero_posterior_retries``
    times for the same datum (retries are billed to the counter). If it is
    still all zero, the weights are reset to uniform and the event logged.
    """
    counter = CallCounter()
    events = events if events is not None else RunEvents()
    gen = rng.derive(LIKELIHOOD_STREAM).generator()
    kind = backend.kind

    def estimate(cloud: ParticleCloud, datum: int) -> np.ndarray:
        if isinstance(kind, SingleSample):
            return single_sample_likelihoods(model, cloud, datum, gen, counter)
        if isinstance(kind, FixedM):
            return fixed_m_likelihoods(model, cloud, datum, kind.m, gen, counter)
        if isinstance(kind, ALE):
            return ale_likelihoods(
                model, cloud, datum, kind.epsilon, kind.gamma, kind.max_samples, gen, counter, events
            )
        raise TypeError(f"unknown backend {kind!r}")

    def recover(cloud: ParticleCloud, datum: int, exc: ZeroPosterior) -> ParticleCloud:
        for _ in range(backend.zero_posterior_retries):
            unnorm = cloud.weights * estimate(cloud, datum)
            total = unnorm.sum()
            if total > 0:
                return ParticleCloud(cloud.positions, unnorm / total)
        events.uniform_resets += 1
        log.debug("zero posterior persisted after %d retries; resetting weights", backend.zero_posterior_retries)
        return ParticleCloud(cloud.positions, np.full(cloud.n, 1.0 / cloud.n))

    cloud = run_filter(prior, data, n, estimate, cfg, rng, on_zero=recover, events=events)
    return posterior_summary(cloud), counter
