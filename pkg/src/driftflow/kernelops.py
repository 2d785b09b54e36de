"""Pairwise costs, Gibbs logits and log-domain Sinkhorn scaling.

All functions accept a leading batch axis: a ``(G, n, m)`` stack of problems is
handled exactly like ``G`` independent ``(n, m)`` problems.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

COSTS = ("sq_euclid_half", "euclid")


@dataclass(frozen=True)
class KernelSpec:
    cost: str = "sq_euclid_half"
    tau: float = 1.0
    tau_neg: float | None = None  # defaults to tau

    def __post_init__(self):
        if self.cost not in COSTS:
            raise ValueError(f"unknown cost {self.cost!r}; expected one of {COSTS}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.tau_neg is not None and not self.tau_neg > 0:
            raise ValueError(f"tau_neg must be positive, got {self.tau_neg}")

    @property
    def temp_pos(self):
        return self.tau

    @property
    def temp_neg(self):
        return self.tau if self.tau_neg is None else self.tau_neg


@dataclass
class CouplingPlan:
    plan: np.ndarray
    row_marginal_err: np.ndarray | float
    col_marginal_err: np.ndarray | float
    logits: np.ndarray | None = None
    col_potential: np.ndarray | None = None

    @property
    def marginal_err(self):
        return np.maximum(self.row_marginal_err, self.col_marginal_err)

    def row_weights(self):
        """Row-normalized plan.

        The row potential is constant along each row and cancels, so this is
        ``row_softmax(logits + g)``; with one iteration ``g == 0`` and the
        result is bitwise ``row_softmax(logits)``.
        """
        if self.logits is None:
            return row_normalize(self.plan)
        return row_softmax(self.logits + self.col_potential[..., None, :])


def pairwise_cost(x, y, cost="sq_euclid_half"):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    diff = x[..., :, None, :] - y[..., None, :, :]
    sq = np.einsum("...k,...k->...", diff, diff)
    if cost == "sq_euclid_half":
        return 0.5 * sq
    if cost == "euclid":
        return np.sqrt(sq)
    raise ValueError(f"unknown cost {cost!r}")


def gibbs_logits(costs, tau):
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return -np.asarray(costs, dtype=np.float64) / tau


def row_softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sinkhorn_from_logits(logits, row_marg, col_marg, iters=1):
    """Alternating log-domain scaling of ``exp(logits)`` toward the given marginals.

    Each iteration is one half-step: odd iterations rescale rows, even iterations
    rescale columns. With ``iters=1`` the plan is ``row_marg * row_softmax(logits)``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    logits = np.asarray(logits, dtype=np.float64)
    row_marg = np.asarray(row_marg, dtype=np.float64)
    col_marg = np.asarray(col_marg, dtype=np.float64)
    if row_marg.shape[-1] != logits.shape[-2] or col_marg.shape[-1] != logits.shape[-1]:
        raise ValueError("marginal lengths do not match the logits shape")
    if np.any(row_marg < 0) or np.any(col_marg < 0):
        raise ValueError("marginals must be nonnegative")
    for m in (row_marg, col_marg):
        if np.any(np.abs(m.sum(axis=-1) - 1.0) > 1e-9):
            raise ValueError("marginals must each sum to 1")

    with np.errstate(divide="ignore"):
        log_a = np.log(row_marg)[..., :, None]
        log_b = np.log(col_marg)[..., None, :]
    f = np.zeros(logits.shape[:-1])
    g = np.zeros(logits.shape[:-2] + logits.shape[-1:])
    for k in range(iters):
        if k % 2 == 0:
            f = log_a[..., 0] - logsumexp(logits + g[..., None, :], axis=-1)
        else:
            g = log_b[..., 0, :] - logsumexp(logits + f[..., :, None], axis=-2)
    plan = np.exp(logits + f[..., :, None] + g[..., None, :])
    row_err = np.abs(plan.sum(axis=-1) - row_marg).max(axis=-1)
    col_err = np.abs(plan.sum(axis=-2) - col_marg).max(axis=-1)
    return CouplingPlan(plan, row_err, col_err, logits, g)


def row_normalize(plan):
    plan = np.asarray(plan, dtype=np.float64)
    return plan / plan.sum(axis=-1, keepdims=True)
