"""Grouped drift velocity field: kernel attraction to ``pos`` minus self-attraction to ``neg``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernelops import KernelSpec, gibbs_logits, pairwise_cost, sinkhorn_from_logits


@dataclass(frozen=True)
class DriftConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    sinkhorn_iters: int = 1

    def __post_init__(self):
        if self.sinkhorn_iters < 1:
            raise ValueError("sinkhorn_iters must be >= 1")


@dataclass
class DriftOutput:
    V: np.ndarray  # (G, B, d)
    pos_plan_err: np.ndarray  # (G,)
    neg_plan_err: np.ndarray  # (G,)


def _weights(x, y, temp, cfg):
    logits = gibbs_logits(pairwise_cost(x, y, cfg.kernel.cost), temp)
    n, m = logits.shape[-2:]
    plan = sinkhorn_from_logits(logits, np.full(n, 1.0 / n), np.full(m, 1.0 / m), cfg.sinkhorn_iters)
    return plan.row_weights(), plan.marginal_err


def grouped_drift(queries, pos, neg, cfg: DriftConfig = DriftConfig()) -> DriftOutput:
    """Drift ``V = W+ @ pos - W- @ neg`` evaluated independently inside each group.

    All arrays are ``(G, B, d)``; kernel weights never couple rows from two
    different groups. The self term ``k(x_i, x_i)`` is kept in ``W-``.
    """
    queries = np.asarray(queries, dtype=np.float64)
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if queries.ndim != 3 or queries.shape != pos.shape or queries.shape != neg.shape:
        raise ValueError(
            f"queries, pos and neg must share a (G, B, d) shape; got "
            f"{queries.shape}, {pos.shape}, {neg.shape}"
        )
    for name, arr in (("queries", queries), ("pos", pos), ("neg", neg)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains non-finite values")
    w_pos, err_pos = _weights(queries, pos, cfg.kernel.temp_pos, cfg)
    w_neg, err_neg = _weights(queries, neg, cfg.kernel.temp_neg, cfg)
    V = w_pos @ pos - w_neg @ neg
    return DriftOutput(V, err_pos, err_neg)


def drift_target(queries, drift: DriftOutput):
    """Regression target ``queries + V`` as a detached copy."""
    queries = np.asarray(queries, dtype=np.float64)
    if queries.shape != drift.V.shape:
        raise ValueError(f"shape mismatch: {queries.shape} vs {drift.V.shape}")
    target = queries + drift.V
    target.flags.writeable = False
    return target
