"""Interpolation schedules, time-pair sampling and grouped batch construction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class Schedule:
    """Interpolant coefficients ``x_t = alpha(t) x0 + beta(t) x1``."""

    kind: str = "linear"

    def __post_init__(self):
        if self.kind != "linear":
            raise ValueError(f"unsupported schedule {self.kind!r}")

    def alpha(self, t):
        return 1.0 - np.asarray(t, dtype=np.float64)

    def beta(self, t):
        return np.asarray(t, dtype=np.float64)


LINEAR = Schedule()


@dataclass(frozen=True)
class TimePair:
    t: float
    r: float

    def __post_init__(self):
        if not 0.0 <= self.t <= self.r <= 1.0:
            raise ValueError(f"time pair must satisfy 0 <= t <= r <= 1, got ({self.t}, {self.r})")


@dataclass(frozen=True)
class TimeSamplerSpec:
    kind: str = "lognorm"
    mu: float = -0.4
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "lognorm"):
            raise ValueError(f"unknown time sampler {self.kind!r}")
        if self.kind == "lognorm" and not self.sigma > 0:
            raise ValueError("lognorm sigma must be positive")


@dataclass(frozen=True)
class GroupedBatch:
    pairs: tuple
    x_t: np.ndarray  # (G, B, d)
    x_r: np.ndarray  # (G, B, d)
    labels: np.ndarray | None = None  # (G, B)

    @property
    def G(self):
        return self.x_t.shape[0]

    @property
    def B(self):
        return self.x_t.shape[1]

    def times(self):
        """Per-group ``(t, r)`` arrays of shape (G,)."""
        t = np.array([p.t for p in self.pairs])
        r = np.array([p.r for p in self.pairs])
        return t, r


def interpolate(x0, x1, t, schedule: Schedule = LINEAR):
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape:
        raise ValueError(f"shape mismatch: {x0.shape} vs {x1.shape}")
    return schedule.alpha(t) * x0 + schedule.beta(t) * x1


def draw_times(spec: TimeSamplerSpec, size, rng):
    """Single time draws in [0, 1] under ``spec``."""
    if spec.kind == "uniform":
        return rng.uniform(0.0, 1.0, size)
    return expit(rng.normal(spec.mu, spec.sigma, size))


def pairs_from_draws(a, b):
    """Sort two draw vectors elementwise into ``TimePair`` objects (t <= r)."""
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return [TimePair(float(x), float(y)) for x, y in zip(lo, hi)]


def sample_time_pairs(spec: TimeSamplerSpec, G: int, seed=None):
    if G < 1:
        raise ValueError("G must be >= 1")
    rng = np.random.default_rng(seed)
    draws = draw_times(spec, (2, G), rng)
    return pairs_from_draws(draws[0], draws[1])


def build_grouped_batch(x0, x1, pairs, B=None, schedule: Schedule = LINEAR, labels=None):
    """Split paired endpoints into contiguous groups and interpolate each at its own pair.

    Row ``i`` of ``x0`` is coupled with row ``i`` of ``x1``; group ``g`` holds rows
    ``g*B:(g+1)*B``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape or x0.ndim != 2:
        raise ValueError(f"endpoint shapes must match and be 2-D: {x0.shape} vs {x1.shape}")
    G = len(pairs)
    n, d = x0.shape
    if G == 0 or n % G:
        raise ValueError(f"{n} rows cannot be split into {G} equal groups")
    if B is None:
        B = n // G
    if G * B != n:
        raise ValueError(f"G*B = {G * B} does not match {n} rows")
    t = np.array([p.t for p in pairs])[:, None, None]
    r = np.array([p.r for p in pairs])[:, None, None]
    g0 = x0.reshape(G, B, d)
    g1 = x1.reshape(G, B, d)
    x_t = schedule.alpha(t) * g0 + schedule.beta(t) * g1
    x_r = schedule.alpha(r) * g0 + schedule.beta(r) * g1
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64).reshape(G, B)
    return GroupedBatch(tuple(pairs), x_t, x_r, labels)
