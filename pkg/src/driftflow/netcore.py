"""Two-time transport network ``u(x_t, t, r)``: a 3-layer SiLU MLP with manual backprop.

Parameters live in one flat float64 vector; the per-layer weight matrices are
views into it, so an in-place optimizer update is immediately visible to
``forward``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

EMBED_MODES = {"t_r": 2, "t_dt": 2, "t_r_dt": 3}
PARAMETERIZATIONS = ("mean_velocity", "direct_state")


class DivergenceError(RuntimeError):
    """Non-finite values appeared during training or inference."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class TimeEmbedSpec:
    mode: str = "t_dt"
    fourier_features: int = 4
    base_freq: float = 0.25

    def __post_init__(self):
        if self.mode not in EMBED_MODES:
            raise ValueError(f"unknown embed mode {self.mode!r}; expected one of {list(EMBED_MODES)}")
        if self.fourier_features < 1:
            raise ValueError("fourier_features must be >= 1")
        if not self.base_freq > 0:
            raise ValueError("base_freq must be positive")

    @property
    def n_scalars(self):
        return EMBED_MODES[self.mode]

    @property
    def dim(self):
        return 2 * self.fourier_features * self.n_scalars


def embed_time(t, r, spec: TimeEmbedSpec = TimeEmbedSpec()):
    """Sinusoidal features of the mode's time scalars.

    Scalar ``t``/``r`` give a 1-D feature vector; arrays of length B give (B, dim).
    Per scalar the block is ``[sin(w_0 s) .. sin(w_{F-1} s), cos(w_0 s) .. cos(w_{F-1} s)]``
    with ``w_k = 2 pi base_freq 2^k``.
    """
    scalar = np.ndim(t) == 0 and np.ndim(r) == 0
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    t, r = np.broadcast_arrays(t, r)
    if spec.mode == "t_r":
        scalars = (t, r)
    elif spec.mode == "t_dt":
        scalars = (t, t - r)
    else:
        scalars = (t, r, t - r)
    freqs = 2 * np.pi * spec.base_freq * 2.0 ** np.arange(spec.fourier_features)
    blocks = []
    for s in scalars:
        arg = s[:, None] * freqs
        blocks += [np.sin(arg), np.cos(arg)]
    out = np.concatenate(blocks, axis=1)
    return out[0] if scalar else out


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n, **hyper):
        return cls(np.zeros(n), np.zeros(n), **hyper)

    def copy(self):
        return AdamState(self.m.copy(), self.v.copy(), self.step, self.lr, self.beta1, self.beta2, self.eps)


def adam_step(state: AdamState, params, grads):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError("params, grads and moment vectors must have equal length")
    state.step += 1
    state.m *= state.beta1
    state.m += (1 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1 - state.beta2) * grads * grads
    c1 = 1 - state.beta1 ** state.step
    c2 = 1 - state.beta2 ** state.step
    denom = np.sqrt(state.v / c2)
    denom += state.eps
    params -= (state.lr / c1) * state.m / denom
    return params


def _silu_grad(z, s):
    # s = sigmoid(z), cached from the forward pass
    return s * (1 + z * (1 - s))


@dataclass(eq=False)
class TransportNet:
    dim: int = 2
    hidden: int = 256
    embed: TimeEmbedSpec = field(default_factory=TimeEmbedSpec)
    parameterization: str = "mean_velocity"
    n_classes: int = 0
    params: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.parameterization not in PARAMETERIZATIONS:
            raise ValueError(f"unknown parameterization {self.parameterization!r}")
        sizes = self.layer_sizes
        n = sum(a * b + b for a, b in sizes)
        if self.params is None:
            self.params = self._init_params(np.random.default_rng(self.seed))
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        if self.params.shape != (n,):
            raise ValueError(f"expected {n} parameters, got {self.params.shape}")
        self._bind()

    @property
    def in_dim(self):
        return self.dim + self.embed.dim + self.n_classes

    @property
    def widths(self):
        return [self.in_dim, self.hidden, self.hidden, self.dim]

    @property
    def layer_sizes(self):
        w = self.widths
        return list(zip(w[:-1], w[1:]))

    @property
    def n_params(self):
        return self.params.size

    def _init_params(self, rng):
        chunks = []
        for i, (fan_in, fan_out) in enumerate(self.layer_sizes):
            if i == 2:
                chunks += [np.zeros(fan_in * fan_out), np.zeros(fan_out)]
            else:
                bound = 1.0 / np.sqrt(fan_in)
                chunks += [rng.uniform(-bound, bound, fan_in * fan_out), rng.uniform(-bound, bound, fan_out)]
        return np.concatenate(chunks)

    def _bind(self):
        self.layers = []
        off = 0
        for a, b in self.layer_sizes:
            W = self.params[off:off + a * b].reshape(a, b)
            off += a * b
            bias = self.params[off:off + b]
            off += b
            self.layers.append((W, bias))

    def copy(self):
        return TransportNet(self.dim, self.hidden, self.embed, self.parameterization,
                            self.n_classes, self.params.copy())

    def inputs(self, x, t, r, labels=None):
        x = np.asarray(x, dtype=np.float64)
        n = len(x)
        emb = embed_time(np.broadcast_to(np.asarray(t, dtype=np.float64), (n,)),
                         np.broadcast_to(np.asarray(r, dtype=np.float64), (n,)), self.embed)
        parts = [x, emb]
        if self.n_classes:
            if labels is None:
                raise ValueError("class-conditional net needs labels")
            onehot = np.zeros((n, self.n_classes))
            onehot[np.arange(n), np.asarray(labels)] = 1.0
            parts.append(onehot)
        elif labels is not None:
            raise ValueError("unconditional net does not accept labels")
        return np.concatenate(parts, axis=1)


def _forward_cache(net: TransportNet, x, t, r, labels=None):
    a0 = net.inputs(x, t, r, labels)
    (W1, b1), (W2, b2), (W3, b3) = net.layers
    z1 = a0 @ W1 + b1
    s1 = expit(z1)
    a1 = z1 * s1
    z2 = a1 @ W2 + b2
    s2 = expit(z2)
    a2 = z2 * s2
    out = a2 @ W3 + b3
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite network activations")
    return out, (a0, z1, s1, a1, z2, s2, a2)


def _backprop(net: TransportNet, cache, d_out):
    a0, z1, s1, a1, z2, s2, a2 = cache
    (W1, _), (W2, _), (W3, _) = net.layers
    gW3 = a2.T @ d_out
    gb3 = d_out.sum(axis=0)
    d_z2 = (d_out @ W3.T) * _silu_grad(z2, s2)
    gW2 = a1.T @ d_z2
    gb2 = d_z2.sum(axis=0)
    d_z1 = (d_z2 @ W2.T) * _silu_grad(z1, s1)
    gW1 = a0.T @ d_z1
    gb1 = d_z1.sum(axis=0)
    return np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2, gW3.ravel(), gb3])


def forward(net: TransportNet, x_t, t, r, labels=None):
    """Raw head output: the mean velocity, or the predicted ``x_r`` for ``direct_state`` nets."""
    return _forward_cache(net, x_t, t, r, labels)[0]


def _step_factor(x, t, r):
    t = np.asarray(t, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if np.any(t > r):
        raise ValueError("transport requires t <= r")
    return np.broadcast_to(r - t, (len(x),))[:, None]


def transport(net: TransportNet, x_t, t, r, labels=None):
    """Map states at time ``t`` to time ``r``: ``x_t + (r - t) u(x_t, t, r)``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h = _step_factor(x_t, t, r)
    out = forward(net, x_t, t, r, labels)
    if net.parameterization == "direct_state":
        return out
    return x_t + h * out


def transport_with_cache(net, x_t, t, r, labels=None):
    x_t = np.asarray(x_t, dtype=np.float64)
    h = _step_factor(x_t, t, r)
    out, cache = _forward_cache(net, x_t, t, r, labels)
    if net.parameterization == "direct_state":
        return out, (cache, None)
    return x_t + h * out, (cache, h)


def backward_transport(net, cache, d_state):
    """Parameter gradient given ``dL/d(transport output)``."""
    fwd_cache, h = cache
    d_out = d_state if h is None else h * d_state
    return _backprop(net, fwd_cache, d_out)


def backward_mse(net: TransportNet, x_t, t, r, target, labels=None):
    """Gradient of ``1/(2B) sum_i ||transport(x_i) - target_i||^2`` w.r.t. the flat params."""
    target = np.asarray(target, dtype=np.float64)
    pred, cache = transport_with_cache(net, x_t, t, r, labels)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: prediction {pred.shape} vs target {target.shape}")
    return backward_transport(net, cache, (pred - target) / len(pred))


def backward_head_mse(net: TransportNet, x_t, t, r, target, labels=None):
    """Gradient of ``1/(2B) sum_i ||forward(x_i) - target_i||^2`` (raw head regression)."""
    out, cache = _forward_cache(net, x_t, t, r, labels)
    return _backprop(net, cache, (out - np.asarray(target)) / len(out)), out


def save_checkpoint(path, net: TransportNet, step=0, **extra):
    header = {
        "widths": net.widths,
        "dim": net.dim,
        "hidden": net.hidden,
        "n_classes": net.n_classes,
        "embed": asdict(net.embed),
        "parameterization": net.parameterization,
        "step": int(step),
        "n_params": int(net.n_params),
    }
    header.update(extra)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(net.params.astype("<f8").tobytes())


def load_checkpoint(path):
    """Return ``(net, header)``; raises ``CheckpointError`` on malformed files."""
    with open(path, "rb") as fh:
        blob = fh.read()
    nl = blob.find(b"\n")
    if nl < 0:
        raise CheckpointError(f"{path}: missing header line")
    try:
        header = json.loads(blob[:nl])
        n = int(header["n_params"])
        params = np.frombuffer(blob[nl + 1:], dtype="<f8")
        if params.size != n or len(blob) - nl - 1 != 8 * n:
            raise CheckpointError(f"{path}: expected {n} parameters, found {len(blob) - nl - 1} bytes")
        net = TransportNet(
            dim=header["dim"],
            hidden=header["hidden"],
            embed=TimeEmbedSpec(**header["embed"]),
            parameterization=header["parameterization"],
            n_classes=header["n_classes"],
            params=params.astype(np.float64),
        )
    except CheckpointError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    if net.widths != header["widths"]:
        raise CheckpointError(f"{path}: widths {header['widths']} do not match architecture")
    if not np.all(np.isfinite(net.params)):
        raise CheckpointError(f"{path}: non-finite parameters")
    return net, header
