"""Few-step generation by iterating the learned two-time transport over a time grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netcore import DivergenceError, TransportNet, forward, transport
from .synthdata import PointBatch


class InferenceError(DivergenceError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    points: np.ndarray
    kind: str = "uniform"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 1 or len(p) < 2:
            raise ValueError("a time grid needs at least two points")
        if p[0] != 0.0 or p[-1] != 1.0:
            raise ValueError("time grid must start at 0 and end at 1")
        if np.any(np.diff(p) <= 0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform(cls, nfe: int):
        if nfe < 1:
            raise ValueError("nfe must be >= 1")
        return cls(np.linspace(0.0, 1.0, nfe + 1))

    @property
    def nfe(self):
        return len(self.points) - 1


def generate(net: TransportNet, source, grid: TimeGrid, record_trajectory=False, labels=None,
             instantaneous=False):
    """Push ``source`` through ``grid.nfe`` transport steps.

    With ``instantaneous=True`` the network is read as a velocity ``v(x, t)``
    (queried at ``r = t``) and integrated with Euler steps, which is how flow
    matching baselines are sampled. Returns a ``PointBatch``, or
    ``(PointBatch, states)`` with all ``nfe + 1`` states when recording.
    """
    if isinstance(source, PointBatch):
        if labels is None:
            labels = source.labels
        source = source.data
    x = np.array(source, dtype=np.float64)
    states = [x.copy()] if record_trajectory else None
    pts = grid.points
    for m in range(grid.nfe):
        t, r = pts[m], pts[m + 1]
        try:
            if instantaneous:
                x = x + (r - t) * forward(net, x, t, t, labels)
            else:
                x = transport(net, x, t, r, labels)
        except DivergenceError as exc:
            raise InferenceError(f"inference step {m}: {exc}", step=None) from exc
        if not np.all(np.isfinite(x)):
            raise InferenceError(f"inference step {m}: non-finite state")
        if record_trajectory:
            states.append(x.copy())
    out = PointBatch(x, labels)
    return (out, states) if record_trajectory else out
