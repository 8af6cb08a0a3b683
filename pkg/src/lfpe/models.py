"""Noisy photodetector model and its closed-form estimation toolkit.

A source emits a photon with probability ``p`` (the efficiency to estimate).
Dark counts click with probability ``alpha`` when no photon arrives, and
losses suppress a click with probability ``beta`` when one does. Outcome 1
is a click, 0 is silence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lfpe.core import SingularInformation, StrongModel, WeakModel

NO_CLICK = 0
CLICK = 1


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class PhotodetectorModel:
    alpha: float
    beta: float

    def __post_init__(self):
        _check_prob("alpha", self.alpha)
        _check_prob("beta", self.beta)

    @property
    def contrast(self) -> float:
        """Slope ``1 - alpha - beta`` of the click probability in ``p``."""
        return 1.0 - self.alpha - self.beta

    def require_identifiable(self) -> None:
        if self.contrast == 0.0:
            raise ValueError(
                f"alpha + beta = 1 (alpha={self.alpha}, beta={self.beta}): "
                "clicks carry no information about p"
            )

    def strong_interface(self) -> PhotodetectorStrong:
        return PhotodetectorStrong(self)

    def weak_interface(self) -> PhotodetectorWeak:
        return PhotodetectorWeak(self)


def click_probability(model: PhotodetectorModel, p):
    """``p (1 - beta) + (1 - p) alpha``; accepts scalars or arrays."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0.0) or np.any(p_arr > 1.0) or not np.all(np.isfinite(p_arr)):
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    q = p_arr * (1.0 - model.beta) + (1.0 - p_arr) * model.alpha
    return float(q) if q.ndim == 0 else q


def _p_column(params) -> np.ndarray:
    arr = np.asarray(params, dtype=float)
    return arr.reshape(-1) if arr.ndim <= 1 else arr[:, 0]


class PhotodetectorStrong(StrongModel):
    def __init__(self, model: PhotodetectorModel):
        self.model = model

    def outcome_count(self) -> int:
        return 2

    def likelihood(self, outcome: int, params) -> np.ndarray:
        if outcome not in (NO_CLICK, CLICK):
            raise ValueError(f"outcome must be 0 or 1, got {outcome!r}")
        q = click_probability(self.model, _p_column(params))
        return q if outcome == CLICK else 1.0 - q


class PhotodetectorWeak(WeakModel):
    """Sampling-only view: one uniform draw per simulated outcome."""

    def __init__(self, model: PhotodetectorModel):
        self.model = model

    def outcome_count(self) -> int:
        return 2

    def sample(self, params, rng: np.random.Generator) -> int:
        q = click_probability(self.model, float(_p_column(params)[0]))
        return CLICK if rng.random() < q else NO_CLICK

    def sample_many(self, params, size: int, rng: np.random.Generator) -> np.ndarray:
        q = click_probability(self.model, float(_p_column(params)[0]))
        return (rng.random(size) < q).astype(np.int64)

    def match_counts(self, positions, datum: int, trials, rng: np.random.Generator) -> np.ndarray:
        # a sum of Bernoulli draws is binomial; same distribution as looping over sample()
        q = click_probability(self.model, _p_column(positions))
        hit = q if datum == CLICK else 1.0 - q
        trials = np.broadcast_to(np.asarray(trials, dtype=np.int64), hit.shape)
        return rng.binomial(trials, hit).astype(np.int64)


def mle(model: PhotodetectorModel, k: int, n_trials: int) -> float:
    """Maximum-likelihood ``p`` from ``k`` clicks in ``n_trials``, clamped to [0, 1]."""
    model.require_identifiable()
    if n_trials < 1:
        raise ValueError(f"need at least one trial, got {n_trials}")
    if not 0 <= k <= n_trials:
        raise ValueError(f"click count {k} outside [0, {n_trials}]")
    p_hat = (k - n_trials * model.alpha) / (n_trials * model.contrast)
    return float(min(1.0, max(0.0, p_hat)))


def fisher_information(model: PhotodetectorModel, p: float, n_trials: int = 1) -> float:
    """Information about ``p`` carried by ``n_trials`` clicks/no-clicks.

    Raises:
        SingularInformation: when the click probability is exactly 0 or 1.
    """
    q = click_probability(model, p)
    if q <= 0.0 or q >= 1.0:
        raise SingularInformation(f"click probability {q} is deterministic at p={p}")
    return model.contrast**2 * n_trials / (q * (1.0 - q))


def asymptotic_mse_bound(model: PhotodetectorModel, n_trials: int) -> float:
    """``1 / (6 (1 - alpha - beta)^2 N)``."""
    model.require_identifiable()
    if n_trials < 1:
        raise ValueError(f"need at least one trial, got {n_trials}")
    return 1.0 / (6.0 * model.contrast**2 * n_trials)


def uniform_k_inverse_information(model: PhotodetectorModel, n_trials: int) -> float:
    """Average of ``1 / I`` at the unclamped MLE, with ``k`` uniform on ``{0, ..., N}``.

    Evaluated by direct summation over every ``k``; at the unclamped MLE the
    click probability is ``k / N``, so each term is ``k (N - k) / (c^2 N^3)``
    with ``c = 1 - alpha - beta``.
    """
    model.require_identifiable()
    N = int(n_trials)
    k = np.arange(N + 1, dtype=float)
    q_hat = k / N
    inv_info = q_hat * (1.0 - q_hat) / (model.contrast**2 * N)
    return float(inv_info.mean())
