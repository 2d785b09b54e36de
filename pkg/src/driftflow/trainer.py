"""Training loops: grouped drift flow matching plus flow-matching and one-step drift baselines."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .driftfield import DriftConfig, drift_target, grouped_drift
from .netcore import (
    AdamState,
    DivergenceError,
    TimeEmbedSpec,
    TransportNet,
    adam_step,
    backward_head_mse,
    backward_transport,
    transport_with_cache,
)
from .synthdata import DatasetSpec, PointBatch, SourceSpec, sample_source, sample_target
from .timepath import (
    GroupedBatch,
    TimePair,
    TimeSamplerSpec,
    build_grouped_batch,
    draw_times,
    interpolate,
    sample_time_pairs,
)

METHODS = ("dfm", "flow_matching", "drift_model")


@dataclass(frozen=True)
class TrainConfig:
    method: str = "dfm"
    G: int = 4
    B: int = 64
    steps: int = 10000
    drift: DriftConfig = field(default_factory=DriftConfig)
    time_sampler: TimeSamplerSpec = field(default_factory=TimeSamplerSpec)
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    conditional: bool = False
    hidden: int = 256
    embed: TimeEmbedSpec = field(default_factory=TimeEmbedSpec)
    parameterization: str = "mean_velocity"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.G < 1 or self.B < 1:
            raise ValueError("G and B must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if not self.lr > 0:
            raise ValueError("lr must be positive")

    @property
    def N(self):
        return self.G * self.B


@dataclass
class TrainReport:
    losses: np.ndarray
    drift_norms: np.ndarray
    wall_time: float
    net: TransportNet
    config: TrainConfig

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("step,loss,mean_drift_norm\n")
            for i, (l, v) in enumerate(zip(self.losses, self.drift_norms)):
                fh.write(f"{i},{l:.17g},{v:.17g}\n")

    def summary(self):
        return {
            "method": self.config.method,
            "steps": len(self.losses),
            "final_loss": float(self.losses[-1]) if len(self.losses) else None,
            "initial_mean_drift_norm": float(self.drift_norms[0]) if len(self.drift_norms) else None,
            "final_mean_drift_norm": float(self.drift_norms[-1]) if len(self.drift_norms) else None,
            "wall_time": self.wall_time,
        }


def _cells(labels, n_classes):
    """Row permutation that sorts each group by label, plus the resulting cell size."""
    G, B = labels.shape
    counts = np.stack([np.bincount(row, minlength=n_classes) for row in labels])
    if np.any(counts != counts[0, 0]):
        raise ValueError("conditional groups must hold the same number of rows per class")
    per = int(counts[0, 0])
    if per < 2:
        raise ValueError("each (group, class) cell needs at least 2 samples")
    order = np.argsort(labels, axis=1, kind="stable")
    return order, per


def conditional_drift(queries, pos, labels, n_classes, cfg: DriftConfig):
    """Drift computed within (group x class) cells, returned in the original row order."""
    G, B, d = queries.shape
    order, per = _cells(labels, n_classes)
    take = lambda a: np.take_along_axis(a, order[:, :, None], axis=1).reshape(G * n_classes, per, d)
    q = take(queries)
    out = grouped_drift(q, take(pos), q, cfg)
    V = np.empty_like(queries)
    np.put_along_axis(V, order[:, :, None], out.V.reshape(G, B, d), axis=1)
    return V


def _dfm_update(net, opt, batch: GroupedBatch, drift: DriftConfig):
    G, B, d = batch.x_t.shape
    t, r = batch.times()
    labels = None if batch.labels is None else batch.labels.reshape(-1)
    x_hat_flat, cache = transport_with_cache(net, batch.x_t.reshape(-1, d), np.repeat(t, B),
                                             np.repeat(r, B), labels)
    x_hat = x_hat_flat.reshape(G, B, d)
    if batch.labels is None:
        V = grouped_drift(x_hat, batch.x_r, x_hat, drift).V
    else:
        V = conditional_drift(x_hat, batch.x_r, batch.labels, net.n_classes, drift)
    target = x_hat + V
    resid = x_hat - target
    group_losses = 0.5 * np.mean(np.sum(resid * resid, axis=2), axis=1)
    loss = float(np.mean(group_losses))
    if not np.isfinite(loss):
        raise DivergenceError("non-finite DFM loss")
    grads = backward_transport(net, cache, resid.reshape(-1, d) / (G * B))
    adam_step(opt, net.params, grads)
    return loss, float(np.mean(np.linalg.norm(V, axis=2)))


def dfm_step(net: TransportNet, opt: AdamState, batch: GroupedBatch, drift: DriftConfig = DriftConfig()):
    """One grouped DFM update; returns the pre-update loss."""
    return _dfm_update(net, opt, batch, drift)[0]


def group_losses(x_hat, x_r, drift: DriftConfig = DriftConfig()):
    """Per-group stop-gradient losses ``1/(2B) sum ||x_hat - sg(x_hat + V)||^2``."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    target = drift_target(x_hat, grouped_drift(x_hat, x_r, x_hat, drift))
    resid = x_hat - target
    return 0.5 * np.mean(np.sum(resid * resid, axis=2), axis=1)


def particle_loss(x_hat, target):
    """``1/2 sum_i ||x_hat_i - target_i||^2`` with ``target`` held constant."""
    resid = np.asarray(x_hat) - np.asarray(target)
    return 0.5 * float(np.sum(resid * resid))


def particle_gradient(x_hat, x_r, drift: DriftConfig = DriftConfig()):
    """Gradient of ``particle_loss`` w.r.t. free particles ``x_hat`` (shape (B, d)).

    The target ``sg(x_hat + V)`` is constant, so the gradient is ``x_hat - target``.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    target = drift_target(x_hat[None], grouped_drift(x_hat[None], np.asarray(x_r)[None], x_hat[None], drift))[0]
    return x_hat - target, target


def _fm_update(net, opt, x0, x1, t, labels=None):
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (len(x0),))
    x_t = interpolate(x0, x1, t[:, None])
    target = x1 - x0
    grads, out = backward_head_mse(net, x_t, t, t, target, labels)
    resid = out - target
    loss = float(0.5 * np.mean(np.sum(resid * resid, axis=1)))
    if not np.isfinite(loss):
        raise DivergenceError("non-finite flow matching loss")
    adam_step(opt, net.params, grads)
    return loss, float(np.mean(np.linalg.norm(resid, axis=1)))


def fm_step(net: TransportNet, opt: AdamState, x0, x1, t, labels=None):
    """Flow matching regression of ``u(x_t, t, t)`` onto ``x1 - x0``; returns the pre-update loss."""
    return _fm_update(net, opt, x0, x1, t, labels)[0]


def drift_model_step(net: TransportNet, opt: AdamState, x0, x1, drift: DriftConfig = DriftConfig(), labels=None):
    """One-step drift model update: DFM with a single group at the pair (0, 1)."""
    batch = build_grouped_batch(x0, x1, [TimePair(0.0, 1.0)], labels=labels)
    return dfm_step(net, opt, batch, drift)


def make_net(config: TrainConfig, dim=2, n_classes=0):
    return TransportNet(dim=dim, hidden=config.hidden, embed=config.embed,
                        parameterization=config.parameterization, n_classes=n_classes,
                        seed=config.seed)


def make_optimizer(config: TrainConfig, net: TransportNet):
    return AdamState.zeros(net.n_params, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)


def _stratified_labels(G, B, n_classes):
    if B % n_classes:
        raise ValueError(f"B={B} must be divisible by the class count {n_classes}")
    return np.tile(np.arange(B) % n_classes, G)


def _as_sampler(spec):
    if isinstance(spec, (DatasetSpec, SourceSpec)):
        fn = sample_target if isinstance(spec, DatasetSpec) else sample_source
        if isinstance(spec, SourceSpec):
            return lambda n, rng, labels=None: fn(spec, n, rng)
        return lambda n, rng, labels=None: fn(spec, n, rng, labels)
    return spec


def train(config: TrainConfig, source, target, n_classes=None, callback=None) -> TrainReport:
    """Run ``config.steps`` updates with fresh endpoint draws each step.

    ``source``/``target`` are specs or callables ``(n, rng, labels) -> PointBatch``.
    ``n_classes`` defaults to the target spec's class count when conditional.
    """
    if config.method == "drift_model":
        config = replace(config, G=1, B=config.N)
    if n_classes is None:
        n_classes = target.class_count if isinstance(target, DatasetSpec) else 0
    if config.conditional and n_classes < 2:
        raise ValueError("conditional training needs a labelled target")
    if not config.conditional:
        n_classes = 0
    draw_source = _as_sampler(source)
    draw_target = _as_sampler(target)
    rng = np.random.default_rng(config.seed)
    probe = draw_source(1, np.random.default_rng(0)).data
    net = make_net(config, dim=probe.shape[1], n_classes=n_classes)
    opt = make_optimizer(config, net)
    losses = np.empty(config.steps)
    norms = np.empty(config.steps)
    G, B, N = config.G, config.B, config.N
    start = time.perf_counter()
    for step in range(config.steps):
        try:
            x0 = draw_source(N, rng).data
            if config.method == "flow_matching":
                x1b = draw_target(N, rng)
                t = draw_times(config.time_sampler, N, rng)
                labels = x1b.labels if n_classes else None
                losses[step], norms[step] = _fm_update(net, opt, x0, x1b.data, t, labels)
            else:
                labels = _stratified_labels(G, B, n_classes) if n_classes else None
                x1 = draw_target(N, rng, labels).data
                if config.method == "drift_model":
                    pairs = [TimePair(0.0, 1.0)]
                else:
                    pairs = sample_time_pairs(config.time_sampler, G, rng)
                batch = build_grouped_batch(x0, x1, pairs, B, labels=labels)
                losses[step], norms[step] = _dfm_update(net, opt, batch, config.drift)
        except DivergenceError as exc:
            raise DivergenceError(str(exc), step=step) from exc
        if callback is not None:
            callback(step, net)
    return TrainReport(losses, norms, time.perf_counter() - start, net, config)
