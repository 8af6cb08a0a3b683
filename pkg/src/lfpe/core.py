"""Shared domain types: particle clouds, priors, simulator interfaces, RNG streams."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

WEIGHT_SUM_TOL = 1e-9


class ZeroPosterior(ArithmeticError):
    """Every particle received zero (weight x likelihood); the update is undefined."""


class DegenerateCovariance(np.linalg.LinAlgError):
    """Posterior covariance could not be factored for the resampling kernel."""


class BudgetExhausted(RuntimeError):
    """An adaptive sampler was given no simulator budget at all."""


class SingularInformation(ArithmeticError):
    """Fisher information is undefined because the outcome is deterministic."""


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    ``stream_id`` is a path of non-negative integers; :meth:`derive` appends
    to it. Streams are backed by ``SeedSequence`` spawn keys feeding the
    counter-based Philox generator, so distinct paths are independent and a
    given path yields the same draws on every platform.
    """

    seed: int
    stream_id: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if any(not 0 <= s < 2**64 for s in self.stream_id):
            raise ValueError(f"stream_id entries must be 64-bit unsigned, got {self.stream_id}")

    def derive(self, *keys: int) -> RngStream:
        return RngStream(self.seed, self.stream_id + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    """Weighted point-mass approximation of a distribution over parameters.

    ``positions`` has shape ``(n, dim)`` and ``weights`` shape ``(n,)``.
    Both arrays are made read-only on construction.
    """

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        w = np.array(self.weights, dtype=float)
        if pos.ndim != 2 or w.ndim != 1 or pos.shape[0] != w.shape[0]:
            raise ValueError(f"shape mismatch: positions {pos.shape}, weights {w.shape}")
        if w.shape[0] == 0 or pos.shape[1] == 0:
            raise ValueError("cloud needs at least one particle and one dimension")
        if not np.all(np.isfinite(pos)):
            raise ValueError("particle positions must be finite")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        pos.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


class Prior(ABC):
    """Distribution over parameter vectors with box-bounded support."""

    @property
    @abstractmethod
    def bounds(self) -> np.ndarray:
        """Array of shape ``(dim, 2)`` with closed ``[low, high]`` per dimension."""

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` parameter vectors, shape ``(n, dim)``."""

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    def clip(self, positions: np.ndarray) -> np.ndarray:
        b = self.bounds
        return np.clip(positions, b[:, 0], b[:, 1])


@dataclass(frozen=True)
class UniformPrior(Prior):
    """Independent uniform prior over a box."""

    box: Sequence[tuple[float, float]] = ((0.0, 1.0),)
    _bounds: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = np.array(self.box, dtype=float).reshape(-1, 2)
        if b.shape[0] == 0 or not np.all(np.isfinite(b)) or np.any(b[:, 0] > b[:, 1]):
            raise ValueError(f"invalid box {self.box!r}")
        b.flags.writeable = False
        object.__setattr__(self, "_bounds", b)

    @property
    def bounds(self) -> np.ndarray:
        return self._bounds

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        b = self._bounds
        return rng.uniform(b[:, 0], b[:, 1], size=(n, b.shape[0]))


class StrongModel(ABC):
    """Simulator that evaluates the likelihood exactly."""

    @abstractmethod
    def outcome_count(self) -> int: ...

    @abstractmethod
    def likelihood(self, outcome: int, params: np.ndarray) -> np.ndarray:
        """``Pr(outcome | params)``; ``params`` may be one vector or an ``(n, dim)`` batch."""


class WeakModel(ABC):
    """Simulator that can only draw outcomes.

    Subclasses implement :meth:`sample`. The batched helpers loop over it by
    default and may be overridden with a vectorized equivalent that has the
    same distribution.
    """

    @abstractmethod
    def outcome_count(self) -> int: ...

    @abstractmethod
    def sample(self, params: np.ndarray, rng: np.random.Generator) -> int:
        """Draw one outcome label at ``params``."""

    def sample_many(self, params: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
        return np.array([self.sample(params, rng) for _ in range(size)], dtype=np.int64)

    def match_counts(
        self,
        positions: np.ndarray,
        datum: int,
        trials: np.ndarray | int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Count how many of ``trials[k]`` fresh draws at ``positions[k]`` equal ``datum``.

        Each counted draw is one simulator call.
        """
        positions = np.atleast_2d(positions)
        trials = np.broadcast_to(np.asarray(trials, dtype=np.int64), (positions.shape[0],))
        out = np.zeros(positions.shape[0], dtype=np.int64)
        for k, (x, t) in enumerate(zip(positions, trials)):
            out[k] = sum(self.sample(x, rng) == datum for _ in range(t))
        return out


def init_cloud(prior: Prior, n: int, rng: RngStream | np.random.Generator) -> ParticleCloud:
    """Draw ``n`` particles from the prior with uniform weights."""
    if int(n) != n or n < 1:
        raise ValueError(f"particle count must be a positive integer, got {n!r}")
    positions = prior.sample(int(n), as_generator(rng))
    return ParticleCloud(positions, np.full(int(n), 1.0 / n))


def effective_sample_size(cloud: ParticleCloud) -> float:
    w = cloud.weights
    if np.all(w == w[0]):
        # exact n for uniform weights; 1/sum(w^2) can be off by an ulp
        return float(cloud.n)
    return float(np.clip(1.0 / np.dot(w, w), 1.0, cloud.n))
