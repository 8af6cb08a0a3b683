"""Sequential Monte Carlo engine: Bayes updates, Liu-West resampling, summaries."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from lfpe.core import (
    DegenerateCovariance,
    ParticleCloud,
    Prior,
    RngStream,
    StrongModel,
    ZeroPosterior,
    as_generator,
    effective_sample_size,
    init_cloud,
)

log = logging.getLogger(__name__)

COV_JITTER = 1e-12

# sub-stream keys under a run's RngStream
INIT_STREAM = 0
RESAMPLE_STREAM = 1
LIKELIHOOD_STREAM = 2


@dataclass(frozen=True)
class ResampleConfig:
    """When to resample (ESS fraction) and how hard Liu-West shrinks toward the mean."""

    ess_threshold_fraction: float = 0.5
    liu_west_a: float = 0.98

    def __post_init__(self):
        if not 0 < self.ess_threshold_fraction <= 1:
            raise ValueError(f"ess_threshold_fraction must be in (0, 1], got {self.ess_threshold_fraction}")
        if not 0 < self.liu_west_a <= 1:
            raise ValueError(f"liu_west_a must be in (0, 1], got {self.liu_west_a}")


@dataclass(frozen=True)
class PosteriorSummary:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.covariance)


@dataclass
class RunEvents:
    """Mutable tally of notable events during one filter run."""

    resamples: int = 0
    zero_posteriors: int = 0
    uniform_resets: int = 0
    budget_hits: int = 0


def bayes_update(cloud: ParticleCloud, likelihoods: Sequence[float] | np.ndarray) -> ParticleCloud:
    """Multiply weights by per-particle likelihoods and renormalize.

    Raises:
        ZeroPosterior: if every product ``w_k * L_k`` is zero.
    """
    lik = np.asarray(likelihoods, dtype=float)
    if lik.shape != (cloud.n,):
        raise ValueError(f"expected {cloud.n} likelihoods, got shape {lik.shape}")
    if np.any(lik < 0) or not np.all(np.isfinite(lik)):
        raise ValueError("likelihoods must be finite and non-negative")
    unnorm = cloud.weights * lik
    total = unnorm.sum()
    if not total > 0:
        raise ZeroPosterior("all particles have zero posterior weight")
    return ParticleCloud(cloud.positions, unnorm / total)


def posterior_summary(cloud: ParticleCloud) -> PosteriorSummary:
    w = cloud.weights
    mean = w @ cloud.positions
    centered = cloud.positions - mean
    cov = (centered * w[:, None]).T @ centered
    cov = 0.5 * (cov + cov.T)
    return PosteriorSummary(mean, cov)


def liu_west_resample(
    cloud: ParticleCloud,
    a: float,
    rng: RngStream | np.random.Generator,
    prior: Prior | None = None,
) -> ParticleCloud:
    """Draw a fresh uniformly weighted cloud from the Liu-West kernel.

    New positions are ``a * x_j + (1 - a) * mean`` plus Gaussian noise with
    covariance ``(1 - a**2) * cov``, with ancestors ``j`` drawn in proportion
    to their weights. Positions are clipped to the prior's support when a
    prior is given.
    """
    gen = as_generator(rng)
    summary = posterior_summary(cloud)
    n, dim = cloud.n, cloud.dim
    ancestors = gen.choice(n, size=n, p=cloud.weights)
    positions = a * cloud.positions[ancestors] + (1.0 - a) * summary.mean
    # draw the noise even when a == 1 so the stream position does not depend on a
    z = gen.standard_normal((n, dim))
    if a < 1.0:
        cov = summary.covariance + COV_JITTER * np.eye(dim)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise DegenerateCovariance(f"posterior covariance is not PSD: {cov!r}") from exc
        positions = positions + np.sqrt(1.0 - a * a) * z @ chol.T
    if prior is not None:
        positions = prior.clip(positions)
    return ParticleCloud(positions, np.full(n, 1.0 / n))


def maybe_resample(
    cloud: ParticleCloud,
    cfg: ResampleConfig,
    rng: RngStream | np.random.Generator,
    prior: Prior | None = None,
) -> ParticleCloud:
    """Resample with Liu-West only when ESS falls below ``cfg.ess_threshold_fraction * n``."""
    if effective_sample_size(cloud) >= cfg.ess_threshold_fraction * cloud.n:
        return cloud
    return liu_west_resample(cloud, cfg.liu_west_a, rng, prior)


LikelihoodFn = Callable[[ParticleCloud, int], np.ndarray]


def run_filter(
    prior: Prior,
    data: Sequence[int],
    n: int,
    likelihoods: LikelihoodFn,
    cfg: ResampleConfig,
    rng: RngStream,
    on_zero: Callable[[ParticleCloud, int, ZeroPosterior], ParticleCloud] | None = None,
    events: RunEvents | None = None,
) -> ParticleCloud:
    """Process ``data`` one datum at a time and return the final cloud.

    ``likelihoods(cloud, datum)`` supplies the per-particle likelihood vector.
    ``on_zero`` handles a :class:`ZeroPosterior`; without it the error
    propagates.
    """
    data = list(data)
    if not data:
        raise ValueError("data must be non-empty")
    events = events if events is not None else RunEvents()
    cloud = init_cloud(prior, n, rng.derive(INIT_STREAM))
    resample_rng = rng.derive(RESAMPLE_STREAM).generator()
    threshold = cfg.ess_threshold_fraction * cloud.n
    for datum in data:
        try:
            cloud = bayes_update(cloud, likelihoods(cloud, datum))
        except ZeroPosterior as exc:
            if on_zero is None:
                raise
            events.zero_posteriors += 1
            cloud = on_zero(cloud, datum, exc)
        if effective_sample_size(cloud) < threshold:
            cloud = liu_west_resample(cloud, cfg.liu_west_a, resample_rng, prior)
            events.resamples += 1
    return cloud


def run_strong(
    model: StrongModel,
    prior: Prior,
    data: Sequence[int],
    n: int,
    cfg: ResampleConfig = ResampleConfig(),
    rng: RngStream = RngStream(0),
    events: RunEvents | None = None,
) -> PosteriorSummary:
    """SMC with exact likelihoods from a strong simulator."""

    def exact(cloud: ParticleCloud, datum: int) -> np.ndarray:
        return np.asarray(model.likelihood(datum, cloud.positions), dtype=float)

    cloud = run_filter(prior, data, n, exact, cfg, rng, events=events)
    return posterior_summary(cloud)
