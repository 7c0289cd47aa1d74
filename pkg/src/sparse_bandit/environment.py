"""Sparse linear reward model and the perturbed adversary's contexts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .perturbation import PerturbationSpec, censor_context, sample_perturbation
from .streams import Purpose, StreamFactory

STRATEGIES = ("uniform01", "fixed_pool", "low_diversity")


@dataclass(frozen=True)
class BanditInstance:
    theta_star: np.ndarray
    m: int
    reward_noise_sigma: float = 0.0
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float).reshape(-1)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "support", np.flatnonzero(theta))
        if self.m < 1:
            raise ValueError("need at least one arm")
        if self.reward_noise_sigma < 0:
            raise ValueError("reward_noise_sigma must be non-negative")

    @property
    def d(self) -> int:
        return self.theta_star.size

    @property
    def k(self) -> int:
        return self.support.size

    @classmethod
    def random(cls, d, k, m, reward_noise_sigma, rng, normalize=True, signs="random"):
        """Support uniform without replacement, magnitudes U[0.5, 1].

        ``signs`` is ``"random"`` (independent +-1) or ``"positive"``.
        """
        if not 1 <= k <= d:
            raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
        if m < 2:
            raise ValueError("a bandit instance needs m >= 2 arms")
        support = np.sort(rng.choice(d, size=k, replace=False))
        theta = np.zeros(d)
        if signs not in ("random", "positive"):
            raise ValueError(f"signs must be 'random' or 'positive', got {signs!r}")
        theta[support] = rng.uniform(0.5, 1.0, size=k)
        flips = rng.choice([-1.0, 1.0], size=k)
        if signs == "random":
            theta[support] *= flips
        if normalize:
            theta /= np.linalg.norm(theta)
        return cls(theta_star=theta, m=m, reward_noise_sigma=reward_noise_sigma)


@dataclass(frozen=True)
class ContextStrategy:
    kind: str = "uniform01"
    # fixed_pool: rows are replayed cyclically; without a pool, pool_size
    # vectors (default m) are drawn from U[0, 1] once per episode
    pool: np.ndarray | None = None
    pool_size: int | None = None
    replay: bool = True
    offset_scale: float = 0.05  # low_diversity: half-width of per-arm offsets

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown context strategy {self.kind!r}; choose from {STRATEGIES}")
        if self.pool is not None:
            object.__setattr__(self, "pool", np.atleast_2d(np.asarray(self.pool, dtype=float)))
        if self.pool_size is not None and self.pool_size < 1:
            raise ValueError("pool_size must be positive")


@dataclass(frozen=True)
class RoundContexts:
    raw: np.ndarray  # m x d
    perturbed: np.ndarray  # m x d

    @property
    def m(self) -> int:
        return self.perturbed.shape[0]


def generate_raw_contexts(strategy: ContextStrategy, instance: BanditInstance, round_: int,
                          streams: StreamFactory) -> np.ndarray:
    """Raw (unperturbed) contexts for one round as an ``m x d`` array."""
    if round_ < 1:
        raise ValueError("rounds are numbered from 1")
    m, d = instance.m, instance.d

    if strategy.kind == "uniform01":
        return np.stack([
            streams.generator(Purpose.RAW_CONTEXT, round_, arm).uniform(0.0, 1.0, d)
            for arm in range(m)
        ])

    if strategy.kind == "fixed_pool":
        pool = strategy.pool
        if pool is None:
            size = strategy.pool_size or m
            pool = streams.generator(Purpose.RAW_CONTEXT, 0, 0).uniform(0.0, 1.0, (size, d))
        if pool.shape[1] != d:
            raise ValueError(f"pool vectors have dimension {pool.shape[1]}, expected {d}")
        start = (round_ - 1) * m
        if not strategy.replay and start + m > pool.shape[0]:
            raise ValueError(f"fixed pool of {pool.shape[0]} vectors exhausted at round {round_}")
        idx = (start + np.arange(m)) % pool.shape[0]
        return pool[idx].copy()

    # low_diversity: one shared direction per episode, tiny per-arm offsets
    base = streams.generator(Purpose.RAW_CONTEXT, 0, 0).uniform(0.0, 1.0, d)
    offsets = np.stack([
        streams.generator(Purpose.RAW_CONTEXT, round_, arm).uniform(-1.0, 1.0, d)
        for arm in range(m)
    ])
    return np.clip(base + strategy.offset_scale * offsets, 0.0, 1.0)


def apply_perturbed_adversary(raw: np.ndarray, spec: PerturbationSpec, round_: int,
                              streams: StreamFactory) -> RoundContexts:
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    perturbed = np.empty_like(raw)
    for arm, mu in enumerate(raw):
        e = sample_perturbation(spec, streams.generator(Purpose.PERTURBATION, round_, arm))
        perturbed[arm] = censor_context(mu, e, spec.censor_bounds)
    return RoundContexts(raw=raw, perturbed=perturbed)


def expected_reward(x, instance: BanditInstance) -> float:
    return float(np.dot(x, instance.theta_star))


def realize_reward(x, instance: BanditInstance, rng: np.random.Generator) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != instance.theta_star.shape:
        raise ValueError(f"context has shape {x.shape}, expected {instance.theta_star.shape}")
    noise = rng.normal(0.0, instance.reward_noise_sigma) if instance.reward_noise_sigma > 0 else 0.0
    return expected_reward(x, instance) + noise


def best_arm(contexts: RoundContexts, instance: BanditInstance) -> tuple[int, float]:
    """Best perturbed context under theta*; ties go to the lowest index."""
    values = contexts.perturbed @ instance.theta_star
    idx = int(np.argmax(values))
    return idx, float(values[idx])
