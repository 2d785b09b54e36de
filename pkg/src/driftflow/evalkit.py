"""Exact empirical W2, transport-bound checks and the analytic Gaussian velocity oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .kernelops import pairwise_cost
from .netcore import forward
from .sampler import TimeGrid
from .synthdata import PointBatch
from .timepath import interpolate

BOUND_SLACK = 1e-9


class MetricError(ValueError):
    pass


@dataclass
class W2Result:
    w2_squared: float
    assignment: np.ndarray


@dataclass(frozen=True)
class GaussianTaskSpec:
    """Source ``N(0, I)`` to target ``N(0, sigma1^2 I)`` along the linear path."""

    sigma1: float = 2.0
    d: int = 2

    def __post_init__(self):
        if not self.sigma1 > 0:
            raise ValueError("sigma1 must be positive")


@dataclass
class BoundReport:
    lhs: float
    rhs: float
    holds: bool


@dataclass
class ActionReport:
    action_sum: float
    bound: float
    holds: bool
    interval_w2: np.ndarray


def exact_w2(a, b, max_n=1024) -> W2Result:
    """Squared 2-Wasserstein distance between two equal-size, equal-weight point sets."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"exact_w2 needs equal-size point sets, got {a.shape} and {b.shape}")
    if len(a) > max_n:
        raise ValueError(f"n={len(a)} exceeds the assignment budget of {max_n}")
    cost = 2.0 * pairwise_cost(a, b, "sq_euclid_half")
    rows, cols = linear_sum_assignment(cost)
    return W2Result(float(cost[rows, cols].sum() / len(a)), cols)


def check_w2_interval_bound(x0, x1, t, r) -> BoundReport:
    """Empirical ``W2(p_t, p_r) <= |r - t| sqrt(E||x1 - x0||^2)`` for shared endpoints."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    lhs = np.sqrt(exact_w2(interpolate(x0, x1, t), interpolate(x0, x1, r)).w2_squared)
    rhs = abs(r - t) * np.sqrt(np.mean(np.sum((x1 - x0) ** 2, axis=1)))
    return BoundReport(float(lhs), float(rhs), bool(lhs <= rhs + BOUND_SLACK))


def check_action_bound(x0, x1, grid: TimeGrid) -> ActionReport:
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    pts = grid.points
    states = [interpolate(x0, x1, t) for t in pts]
    w2 = np.array([exact_w2(states[m], states[m + 1]).w2_squared for m in range(grid.nfe)])
    action = float(np.sum(w2 / np.diff(pts)))
    bound = float(np.mean(np.sum((x1 - x0) ** 2, axis=1)))
    return ActionReport(action, bound, action <= bound + BOUND_SLACK, w2)


def gaussian_velocity_coef(t, spec: GaussianTaskSpec = GaussianTaskSpec()):
    s2 = spec.sigma1 ** 2
    return (t * s2 - (1 - t)) / ((1 - t) ** 2 + t ** 2 * s2)


def gaussian_marginal_velocity(x, t, spec: GaussianTaskSpec = GaussianTaskSpec()):
    """Closed-form ``E[X1 - X0 | X_t = x]``; linear in ``x``."""
    if not 0 <= t < 1:
        raise ValueError("t must lie in [0, 1)")
    return gaussian_velocity_coef(t, spec) * np.asarray(x, dtype=np.float64)


def gaussian_flow_map_coef(t, r, spec: GaussianTaskSpec = GaussianTaskSpec()):
    """Exact flow of the Gaussian task is a scaling: ``Phi_{t,r}(x) = coef * x``."""
    s = lambda u: np.sqrt((1 - u) ** 2 + u ** 2 * spec.sigma1 ** 2)
    return s(r) / s(t)


def _subsample(x, n, rng):
    if len(x) == n:
        return x
    return x[np.sort(rng.choice(len(x), size=n, replace=False))]


def emd_to_target(generated, reference, seed=0, subsample=True) -> float:
    """Squared W2 between generated and reference points (per-class mean if labelled).

    The larger set is subsampled (seeded) to the smaller size unless
    ``subsample=False``, in which case unequal sizes are an error.
    """
    gen = generated if isinstance(generated, PointBatch) else PointBatch(generated)
    ref = reference if isinstance(reference, PointBatch) else PointBatch(reference)
    if (gen.labels is None) != (ref.labels is None):
        raise MetricError("cannot compare labelled with unlabelled points")
    rng = np.random.default_rng(seed)

    def one(a, b):
        if len(a) != len(b):
            if not subsample:
                raise MetricError(f"point counts differ ({len(a)} vs {len(b)})")
            n = min(len(a), len(b))
            a, b = _subsample(a, n, rng), _subsample(b, n, rng)
        return exact_w2(a, b).w2_squared

    if gen.labels is None:
        return one(gen.data, ref.data)
    classes = np.union1d(gen.labels, ref.labels)
    values = []
    for c in classes:
        a, b = gen.data[gen.labels == c], ref.data[ref.labels == c]
        if len(a) == 0 or len(b) == 0:
            side = "generated" if len(a) == 0 else "reference"
            raise MetricError(f"class {c} is absent from the {side} points")
        values.append(one(a, b))
    return float(np.mean(values))


def gaussian_test_grid(spec: GaussianTaskSpec = GaussianTaskSpec(), times=(0.1, 0.3, 0.5, 0.7), side=8):
    """``side**2`` lattice points per time, scaled to the marginal std at that time.

    Returns ``(x, t)`` with ``len(times) * side**2`` rows; the default is 256 points.
    """
    if spec.d != 2:
        raise ValueError("the lattice test grid is two-dimensional")
    g = np.linspace(-1.5, 1.5, side)
    lattice = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    xs, ts = [], []
    for t in times:
        scale = np.sqrt((1 - t) ** 2 + t ** 2 * spec.sigma1 ** 2)
        xs.append(lattice * scale)
        ts.append(np.full(len(lattice), t))
    return np.concatenate(xs), np.concatenate(ts)


def short_step_velocity_gap(net, hs, spec: GaussianTaskSpec = GaussianTaskSpec(), grid=None):
    """Mean ``||u(x, t, t + h) - v(x, t)||`` over the test grid for each ``h``."""
    x, t = gaussian_test_grid(spec) if grid is None else grid
    if np.any(t + max(hs) > 1):
        raise ValueError("test times plus h must stay inside [0, 1]")
    v = gaussian_velocity_coef(t, spec)[:, None] * x
    return np.array([np.mean(np.linalg.norm(forward(net, x, t, t + h) - v, axis=1)) for h in hs])
