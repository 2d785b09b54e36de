"""Minimal standalone SVG scatter plots."""
from __future__ import annotations

import numpy as np

SIZE = 480
PAD = 30


def scatter_svg(layers, path, radius=1.8, title=None):
    """Write ``layers`` (a list of ``(points, colour)``) as one SVG with shared axes."""
    pts = np.concatenate([np.asarray(p, dtype=np.float64)[:, :2] for p, _ in layers])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    centre = (lo + hi) / 2
    scale = (SIZE - 2 * PAD) / span

    def px(p):
        x = SIZE / 2 + (p[:, 0] - centre[0]) * scale
        y = SIZE / 2 - (p[:, 1] - centre[1]) * scale
        return x, y

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
           f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>']
    ax, ay = px(np.zeros((1, 2)))
    ax = float(np.clip(ax[0], PAD, SIZE - PAD))
    ay = float(np.clip(ay[0], PAD, SIZE - PAD))
    out.append(f'<line x1="{PAD}" y1="{ay:.2f}" x2="{SIZE - PAD}" y2="{ay:.2f}" stroke="#888" stroke-width="0.8"/>')
    out.append(f'<line x1="{ax:.2f}" y1="{PAD}" x2="{ax:.2f}" y2="{SIZE - PAD}" stroke="#888" stroke-width="0.8"/>')
    if title:
        out.append(f'<text x="{PAD}" y="{PAD - 10}" font-family="sans-serif" font-size="12">{title}</text>')
    for points, colour in layers:
        xs, ys = px(np.asarray(points, dtype=np.float64))
        out.append(f'<g fill="{colour}" fill-opacity="0.6">')
        out += [f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius}"/>' for x, y in zip(xs, ys)]
        out.append("</g>")
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
