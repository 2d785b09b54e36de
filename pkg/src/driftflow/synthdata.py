"""Seeded 2-D source and target distributions.

Every generator is a pure function of ``(spec, n, seed)``. Targets are sampled
exactly from their support (no rejection), which keeps closed-form membership
predicates available for testing.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DATASETS = ("letter_f", "letter_m", "two_moons", "checkerboard", "gaussian_iso")
SOURCES = ("circle_uniform", "gaussian_iso")

# class counts each dataset can label
_CLASS_SUPPORT = {
    "letter_f": (0,),
    "letter_m": (0,),
    "two_moons": (0, 2),
    "checkerboard": (0, 2, 4, 8),
    "gaussian_iso": (0,),
}

_DEFAULT_NOISE = {"two_moons": 0.05}
_DEFAULT_SCALE = {"checkerboard": 2.0}


def _letter_f_rects():
    return np.array([
        [-0.6, -0.3, -1.0, 1.0],
        [-0.6, 0.6, 0.7, 1.0],
        [-0.6, 0.35, -0.05, 0.25],
    ])


def _letter_m_rects():
    rects = [[-0.9, -0.6, -1.0, 1.0], [0.6, 0.9, -1.0, 1.0]]
    # diagonals run from the bar tops (x = -+0.75, y = 1) down to (0, -0.2)
    edges = np.linspace(-0.2, 1.0, 9)
    for lo, hi in zip(edges[:-1], edges[1:]):
        frac = ((lo + hi) / 2 + 0.2) / 1.2
        xc = 0.75 * frac
        rects.append([-xc - 0.15, -xc + 0.15, lo, hi])
        rects.append([xc - 0.15, xc + 0.15, lo, hi])
    return np.array(rects)


LETTER_RECTS = {"letter_f": _letter_f_rects(), "letter_m": _letter_m_rects()}


@dataclass(frozen=True)
class DatasetSpec:
    """Target distribution description.

    ``scale`` multiplies the canonical geometry (for ``gaussian_iso`` it is the
    standard deviation; for ``checkerboard`` the grid half-extent).
    """

    name: str = "two_moons"
    scale: float | None = None
    noise_std: float | None = None
    class_count: int = 0

    def __post_init__(self):
        if self.name not in DATASETS:
            raise ValueError(f"unknown dataset {self.name!r}; expected one of {DATASETS}")
        if self.scale is None:
            object.__setattr__(self, "scale", _DEFAULT_SCALE.get(self.name, 1.0))
        if self.noise_std is None:
            object.__setattr__(self, "noise_std", _DEFAULT_NOISE.get(self.name, 0.0))
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not self.noise_std >= 0:
            raise ValueError(f"noise_std must be nonnegative, got {self.noise_std}")
        if self.class_count not in _CLASS_SUPPORT[self.name]:
            raise ValueError(
                f"class_count={self.class_count} not supported for {self.name}; "
                f"allowed: {_CLASS_SUPPORT[self.name]}"
            )


@dataclass(frozen=True)
class SourceSpec:
    kind: str = "circle_uniform"
    radius_or_std: float = 1.5

    def __post_init__(self):
        if self.kind not in SOURCES:
            raise ValueError(f"unknown source {self.kind!r}; expected one of {SOURCES}")
        if not self.radius_or_std > 0:
            raise ValueError(f"radius_or_std must be positive, got {self.radius_or_std}")


@dataclass
class PointBatch:
    data: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"data must be 2-D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("data contains non-finite entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.data),):
                raise ValueError("labels must have one entry per row")

    def __len__(self):
        return len(self.data)

    def to_csv(self, path):
        write_csv(path, self.data, self.labels)

    @classmethod
    def from_csv(cls, path):
        data, labels = read_csv(path)
        return cls(data, labels)


def _rng(seed):
    return np.random.default_rng(seed)


def sample_source(spec: SourceSpec, n: int, seed=None) -> PointBatch:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    if spec.kind == "gaussian_iso":
        return PointBatch(spec.radius_or_std * rng.standard_normal((n, 2)))
    theta = rng.uniform(0.0, 2 * np.pi, n)
    return PointBatch(spec.radius_or_std * np.column_stack([np.cos(theta), np.sin(theta)]))


def _sample_rects(rects, n, rng):
    areas = (rects[:, 1] - rects[:, 0]) * (rects[:, 3] - rects[:, 2])
    idx = rng.choice(len(rects), size=n, p=areas / areas.sum())
    u = rng.uniform(size=(n, 2))
    r = rects[idx]
    x = r[:, 0] + u[:, 0] * (r[:, 1] - r[:, 0])
    y = r[:, 2] + u[:, 1] * (r[:, 3] - r[:, 2])
    return np.column_stack([x, y])


def _moons(labels, rng):
    theta = rng.uniform(0.0, np.pi, len(labels))
    upper = np.column_stack([np.cos(theta), np.sin(theta)])
    lower = np.column_stack([1.0 - np.cos(theta), 0.5 - np.sin(theta)])
    return np.where(labels[:, None] == 0, upper, lower)


def _black_cells(scale):
    side = scale / 2.0
    cells = [(i, j) for j in range(-2, 2) for i in range(-2, 2) if (i + j) % 2 == 0]
    return np.array(cells, dtype=np.float64) * side, side


def _checkerboard(cell_idx, scale, rng):
    # 4x4 grid on [-scale, scale]^2; black cells have even index parity
    corners, side = _black_cells(scale)
    u = rng.uniform(size=(len(cell_idx), 2))
    return corners[cell_idx] + side * u


def sample_target(spec: DatasetSpec, n: int, seed=None, labels=None) -> PointBatch:
    """Draw ``n`` points from the target dataset.

    If ``labels`` is given (class-conditional datasets only), each row is drawn
    from the class its label names; otherwise labels are drawn uniformly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    k = spec.class_count
    if labels is not None:
        if k == 0:
            raise ValueError(f"{spec.name} with class_count=0 cannot be sampled per label")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,) or labels.min() < 0 or labels.max() >= k:
            raise ValueError(f"labels must be {n} integers in [0, {k})")

    if spec.name in LETTER_RECTS:
        pts = _sample_rects(LETTER_RECTS[spec.name], n, rng)
    elif spec.name == "gaussian_iso":
        pts = rng.standard_normal((n, 2))
    elif spec.name == "two_moons":
        arcs = labels if labels is not None else rng.integers(0, 2, n)
        pts = _moons(arcs, rng)
        if k == 0:
            labels = None
        else:
            labels = arcs
    else:
        if labels is None:
            cells = rng.integers(0, 8, n)
        else:
            # cells with index = label (mod k)
            cells = labels + k * rng.integers(0, 8 // k, n)
        pts = _checkerboard(cells, 1.0, rng)
        labels = cells % k if k else None

    pts = spec.scale * pts
    if spec.noise_std > 0:
        pts = pts + spec.noise_std * rng.standard_normal(pts.shape)
    return PointBatch(pts, labels)


def in_support(spec: DatasetSpec, points, atol=1e-9) -> np.ndarray:
    """Boolean mask of points on the zero-noise support of ``spec``."""
    p = np.asarray(points, dtype=np.float64) / spec.scale
    x, y = p[:, 0], p[:, 1]
    if spec.name in LETTER_RECTS:
        r = LETTER_RECTS[spec.name]
        inside = ((x[:, None] >= r[:, 0] - atol) & (x[:, None] <= r[:, 1] + atol)
                  & (y[:, None] >= r[:, 2] - atol) & (y[:, None] <= r[:, 3] + atol))
        return inside.any(axis=1)
    if spec.name == "two_moons":
        up = (np.abs(np.hypot(x, y) - 1) <= atol) & (y >= -atol)
        low = (np.abs(np.hypot(x - 1, y - 0.5) - 1) <= atol) & (y <= 0.5 + atol)
        return up | low
    if spec.name == "checkerboard":
        side = 0.5
        ix, iy = np.floor(x / side), np.floor(y / side)
        return ((ix + iy) % 2 == 0) & (np.abs(x) <= 1) & (np.abs(y) <= 1)
    return np.isfinite(x) & np.isfinite(y)


def label_from_coords(spec: DatasetSpec, points) -> np.ndarray:
    """Re-derive class labels from zero-noise coordinates."""
    p = np.asarray(points, dtype=np.float64) / spec.scale
    if spec.name == "two_moons":
        d_up = np.abs(np.hypot(p[:, 0], p[:, 1]) - 1)
        d_low = np.abs(np.hypot(p[:, 0] - 1, p[:, 1] - 0.5) - 1)
        return (d_low < d_up).astype(np.int64)
    if spec.name == "checkerboard" and spec.class_count:
        corners, side = _black_cells(1.0)
        cell = np.floor(p / side) * side
        match = np.all(np.isclose(cell[:, None, :], corners[None]), axis=2)
        return match.argmax(axis=1) % spec.class_count
    raise ValueError(f"{spec.name} with class_count={spec.class_count} has no labels")


def write_csv(path, data, labels=None):
    data = np.asarray(data, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [f"x{i}" for i in range(data.shape[1])]
        if labels is not None:
            header.append("label")
        w.writerow(header)
        for i, row in enumerate(data):
            cells = [format(v, ".17g") for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            w.writerow(cells)


def read_csv(path):
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    has_label = header[-1] == "label"
    ncol = len(header) - has_label
    if ncol < 1 or header[:ncol] != [f"x{i}" for i in range(ncol)]:
        raise ValueError(f"{path}: unexpected header {header}")
    data = np.array([[float(v) for v in r[:ncol]] for r in body], dtype=np.float64).reshape(-1, ncol)
    labels = np.array([int(r[ncol]) for r in body], dtype=np.int64) if has_label else None
    return data, labels
