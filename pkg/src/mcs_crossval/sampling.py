"""Choosing which representative value each rater is asked about."""

from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

from .profiling import Profile


class SamplingStrategy(str, enum.Enum):
    RANDOM = "random"
    PROPORTIONAL = "proportional"
    REVERSE = "reverse"
    INVERSE = "inverse"

    @classmethod
    def parse(cls, name: str | SamplingStrategy) -> SamplingStrategy:
        try:
            return cls(str(getattr(name, "value", name)).lower())
        except ValueError:
            choices = " | ".join(s.value for s in cls)
            raise ValueError(f"unknown sampling strategy {name!r} (expected {choices})") from None


def _masses(profile: Profile | Sequence[float]) -> np.ndarray:
    p = profile.masses if isinstance(profile, Profile) else np.asarray(profile, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("profile has no bins")
    if np.any(p <= 0):
        raise ValueError("every bin mass must be positive")
    return p


def strategy_weights(profile: Profile | Sequence[float], strategy: SamplingStrategy | str) -> np.ndarray:
    """Sampling probability of each representative under ``strategy``.

    Reverse sampling mirrors the masses about the midpoint of their range,
    ``s_i = (d - p_i) / (n*d - 1)`` with ``d = p_min + p_max``; inverse
    sampling uses ``s_i`` proportional to ``1/p_i``.
    """
    p = _masses(profile)
    n = p.size
    strategy = SamplingStrategy.parse(strategy)
    if strategy is SamplingStrategy.RANDOM:
        return np.full(n, 1.0 / n)
    if strategy is SamplingStrategy.PROPORTIONAL:
        return p.copy()
    if strategy is SamplingStrategy.REVERSE:
        if n == 1:
            return np.ones(1)
        d = p.min() + p.max()
        return (d - p) / (n * d - 1.0)
    inv = 1.0 / p
    return inv / inv.sum()


def draw_values(weights: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` representative indices i.i.d. from ``weights``."""
    if size == 0:
        return np.empty(0, dtype=np.int64)
    if weights.size == 1:
        return np.zeros(size, dtype=np.int64)
    cdf = np.cumsum(weights)
    u = rng.random(size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), weights.size - 1)


def draw_value(profile: Profile | Sequence[float], strategy: SamplingStrategy | str, rng: np.random.Generator) -> int:
    """Draw one representative index with probability ``s_i``."""
    return int(draw_values(strategy_weights(profile, strategy), rng, 1)[0])
