"""Randomized property suites behind ``driftflow verify``.

Every instance draws from its own seed (``base_seed + index``) so a failure can
be replayed in isolation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .driftfield import DriftConfig, grouped_drift
from .evalkit import (
    BOUND_SLACK,
    GaussianTaskSpec,
    check_action_bound,
    check_w2_interval_bound,
    short_step_velocity_gap,
)
from .kernelops import gibbs_logits, pairwise_cost, row_softmax, sinkhorn_from_logits
from .netcore import TimeEmbedSpec, TransportNet, backward_mse, transport
from .sampler import TimeGrid
from .synthdata import DatasetSpec, SourceSpec
from .trainer import TrainConfig, particle_gradient, particle_loss, train

SUITES = ("drift_equilibrium", "gradient_fd", "w2_bounds", "action_bound", "infinitesimal_limit", "sinkhorn")

GRADIENT_RTOL = 1e-4
STOP_GRADIENT_RTOL = 1e-5
EQUILIBRIUM_ATOL = 1e-12
SINKHORN_ATOL = 1e-6
SHORT_STEPS = (0.2, 0.1, 0.05)


@dataclass
class SuiteResult:
    suite: str
    passed: bool
    n_checked: int
    metrics: dict = field(default_factory=dict)
    first_failing_seed: int | None = None

    def lines(self):
        status = "PASS" if self.passed else "FAIL"
        out = [f"{self.suite}: {status} ({self.n_checked} instances)"]
        out += [f"  {k} = {v:.6g}" if isinstance(v, float) else f"  {k} = {v}" for k, v in self.metrics.items()]
        if self.first_failing_seed is not None:
            out.append(f"  first failing seed = {self.first_failing_seed}")
        return out


class _Tracker:
    def __init__(self):
        self.first = None
        self.n = 0

    def record(self, ok, seed):
        self.n += 1
        if not ok and self.first is None:
            self.first = seed


def relative_error(a, b, floor=1e-12):
    """Norm-wise relative discrepancy ``||a - b|| / max(||a||, ||b||, floor)``."""
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))


def drift_equilibrium(seed=0, n=1000):
    tr = _Tracker()
    worst = 0.0
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        G, B, d = rng.integers(1, 5), rng.integers(1, 33), rng.integers(1, 4)
        q = rng.normal(size=(G, B, d)) * rng.uniform(0.1, 3)
        p = rng.normal(size=(G, B, d)) * rng.uniform(0.1, 3)
        cfg = DriftConfig(sinkhorn_iters=int(rng.integers(1, 4)))
        v = float(np.max(np.abs(grouped_drift(q, p, p.copy(), cfg).V)))
        worst = max(worst, v)
        tr.record(v < EQUILIBRIUM_ATOL, seed + i)
    return SuiteResult("drift_equilibrium", tr.first is None, tr.n, {"max_abs_V": worst}, tr.first)


def _fd_gradient(net, x, t, r, target, eps=1e-6):
    def loss():
        diff = transport(net, x, t, r) - target
        return 0.5 * np.sum(diff * diff) / len(x)

    g = np.empty(net.n_params)
    for k in range(net.n_params):
        old = net.params[k]
        net.params[k] = old + eps
        up = loss()
        net.params[k] = old - eps
        down = loss()
        net.params[k] = old
        g[k] = (up - down) / (2 * eps)
    return g


def network_gradient_errors(seed=0, n=100):
    """Relative error of the analytic network gradient against central differences."""
    errs = []
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        net = TransportNet(hidden=int(rng.integers(2, 9)), embed=TimeEmbedSpec("t_dt", 2), seed=seed + i,
                           parameterization="mean_velocity" if i % 2 == 0 else "direct_state")
        net.params[:] = rng.normal(scale=0.5, size=net.n_params)
        B = int(rng.integers(1, 9))
        x = rng.normal(size=(B, 2))
        t = rng.uniform(0, 1, B)
        r = t + (1 - t) * rng.uniform(0, 1, B)
        target = rng.normal(size=(B, 2))
        errs.append(relative_error(backward_mse(net, x, t, r, target), _fd_gradient(net, x, t, r, target)))
    return np.array(errs)


def stop_gradient_errors(seed=0, n=100):
    """Relative error between ``-V`` and a finite-difference gradient of the frozen-target loss."""
    errs = []
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        B, d = int(rng.integers(1, 17)), int(rng.integers(1, 4))
        xh = rng.normal(size=(B, d))
        y = rng.normal(size=(B, d)) + rng.normal(size=d)
        _, target = particle_gradient(xh, y)
        V = target - xh
        eps = 1e-6
        fd = np.empty_like(xh)
        for idx in np.ndindex(*xh.shape):
            up, down = xh.copy(), xh.copy()
            up[idx] += eps
            down[idx] -= eps
            fd[idx] = (particle_loss(up, target) - particle_loss(down, target)) / (2 * eps)
        errs.append(relative_error(fd, -V))
    return np.array(errs)


def gradient_fd(seed=0, n=100):
    net_err = network_gradient_errors(seed, n)
    sg_err = stop_gradient_errors(seed, n)
    bad = [seed + i for i in range(n) if net_err[i] >= GRADIENT_RTOL or sg_err[i] >= STOP_GRADIENT_RTOL]
    metrics = {"max_rel_err_network": float(net_err.max()), "max_rel_err_stop_gradient": float(sg_err.max())}
    return SuiteResult("gradient_fd", not bad, 2 * n, metrics, bad[0] if bad else None)


def w2_bounds(seed=0, n=1000, max_points=256):
    tr = _Tracker()
    worst = -np.inf
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        m = int(rng.integers(2, max_points + 1))
        x0 = rng.normal(size=(m, 2))
        x1 = rng.normal(size=(m, 2)) * rng.uniform(0.2, 3) + rng.normal(size=2)
        t, r = np.sort(rng.uniform(0, 1, 2))
        rep = check_w2_interval_bound(x0, x1, t, r)
        worst = max(worst, rep.lhs - rep.rhs)
        tr.record(rep.holds, seed + i)
    return SuiteResult("w2_bounds", tr.first is None, tr.n,
                       {"worst_lhs_minus_rhs": float(worst), "slack": BOUND_SLACK}, tr.first)


def action_bound(seed=0, n=1000, max_points=128):
    tr = _Tracker()
    worst = -np.inf
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        m = int(rng.integers(2, max_points + 1))
        x0 = rng.normal(size=(m, 2))
        x1 = rng.uniform(-2, 2, (m, 2))
        rep = check_action_bound(x0, x1, TimeGrid.uniform(int(rng.integers(1, 9))))
        worst = max(worst, rep.action_sum - rep.bound)
        tr.record(rep.holds, seed + i)
    return SuiteResult("action_bound", tr.first is None, tr.n,
                       {"worst_action_minus_bound": float(worst), "slack": BOUND_SLACK}, tr.first)


def sinkhorn(seed=0, n=100, size=64, iters=200):
    tr = _Tracker()
    worst = 0.0
    softmax_exact = True
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        x = rng.normal(size=(size, 2))
        y = rng.normal(size=(size, 2)) + rng.normal(size=2)
        logits = gibbs_logits(pairwise_cost(x, y), rng.uniform(0.5, 2.0))
        a = rng.dirichlet(np.ones(size))
        b = rng.dirichlet(np.ones(size))
        err = sinkhorn_from_logits(logits, a, b, iters).marginal_err
        u = np.full(size, 1.0 / size)
        same = np.array_equal(sinkhorn_from_logits(logits, u, u, 1).row_weights(), row_softmax(logits))
        worst = max(worst, err)
        softmax_exact &= same
        tr.record(err < SINKHORN_ATOL and same, seed + i)
    return SuiteResult("sinkhorn", tr.first is None, tr.n,
                       {"max_marginal_err": worst, "single_iter_equals_softmax": softmax_exact}, tr.first)


def infinitesimal_limit(seed=0, steps=5000, hs=SHORT_STEPS):
    """Train on the Gaussian task and check ``u(x, t, t + h) -> v(x, t)`` as ``h`` shrinks."""
    cfg = TrainConfig(steps=steps, seed=seed)
    rep = train(cfg, SourceSpec("gaussian_iso", 1.0), DatasetSpec("gaussian_iso", scale=2.0))
    gaps = short_step_velocity_gap(rep.net, hs, GaussianTaskSpec(sigma1=2.0))
    monotone = bool(np.all(np.diff(gaps) <= 0))
    reduction = float(1 - gaps[-1] / gaps[0])
    ok = monotone and reduction >= 0.2
    metrics = {f"gap_h={h:g}": float(g) for h, g in zip(hs, gaps)}
    metrics["reduction"] = reduction
    return SuiteResult("infinitesimal_limit", ok, len(hs), metrics, None if ok else seed)


def run_suite(name, seed=0):
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    return globals()[name](seed)
