"""SVG rendering of two-dimensional partitions.

Draws scenario points sized by weight, center markers, and the Voronoi cell
boundaries clipped to the plot box. Each boundary edge is emitted once as a
``voronoi-edge`` line element.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import DimensionNotTwo
from .partition import QuantizationSolution

_VIEW = 640.0
_MARGIN = 48.0


def _clip_interval(t_lo, t_hi, a, b):
    """Intersect {t : a*t <= b} with [t_lo, t_hi]."""
    if abs(a) < 1e-15:
        return (t_lo, t_hi) if b >= 0 else (1.0, -1.0)
    bound = b / a
    if a > 0:
        return t_lo, min(t_hi, bound)
    return max(t_lo, bound), t_hi


def _voronoi_edges(centers: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Segments of pairwise bisectors that survive all other centers' dominance,
    clipped to the box [lo, hi]. Yields ((x1, y1), (x2, y2)) per edge."""
    count = centers.shape[0]
    for i in range(count):
        for j in range(i + 1, count):
            mid = 0.5 * (centers[i] + centers[j])
            normal = centers[j] - centers[i]
            direction = np.array([-normal[1], normal[0]])
            direction = direction / np.linalg.norm(direction)
            t_lo, t_hi = -np.inf, np.inf
            # stay inside the plot box
            for dim in range(2):
                for sign, bound in ((1.0, hi[dim]), (-1.0, -lo[dim])):
                    t_lo, t_hi = _clip_interval(
                        t_lo, t_hi, sign * direction[dim], bound - sign * mid[dim]
                    )
            # dominated by no third center: |p-c_i|^2 <= |p-c_k|^2
            for k in range(count):
                if k in (i, j):
                    continue
                delta = centers[k] - centers[i]
                a = 2.0 * float(direction @ delta)
                b = float(centers[k] @ centers[k] - centers[i] @ centers[i]) - 2.0 * float(
                    mid @ delta
                )
                t_lo, t_hi = _clip_interval(t_lo, t_hi, a, b)
            if t_hi - t_lo > 1e-12:
                start = mid + t_lo * direction
                end = mid + t_hi * direction
                yield (start[0], start[1]), (end[0], end[1])


def export_partition_svg(solution: QuantizationSolution, path: str | Path) -> None:
    """Write an SVG of a 2-D partition; raises DimensionNotTwo otherwise."""
    partition = solution.partition
    if partition.dimension != 2:
        raise DimensionNotTwo(f"SVG export requires k=2, got k={partition.dimension}")
    points = partition.scenarios.points
    weights = partition.scenarios.weights
    centers = partition.centers

    everything = np.vstack([points, centers])
    lo = everything.min(axis=0)
    hi = everything.max(axis=0)
    pad = 0.08 * np.maximum(hi - lo, 1e-9)
    lo = lo - pad
    hi = hi + pad

    span = hi - lo
    scale = (_VIEW - 2 * _MARGIN) / span

    def to_px(p):
        x = _MARGIN + (p[0] - lo[0]) * scale[0]
        y = _VIEW - _MARGIN - (p[1] - lo[1]) * scale[1]
        return x, y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_VIEW:.0f}" '
        f'height="{_VIEW:.0f}" viewBox="0 0 {_VIEW:.0f} {_VIEW:.0f}">',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_VIEW - 2 * _MARGIN}" '
        f'height="{_VIEW - 2 * _MARGIN}" fill="white" stroke="black"/>',
    ]
    for start, end in _voronoi_edges(centers, lo, hi):
        x1, y1 = to_px(start)
        x2, y2 = to_px(end)
        parts.append(
            f'<line class="voronoi-edge" x1="{x1:.2f}" y1="{y1:.2f}" '
            f'x2="{x2:.2f}" y2="{y2:.2f}" stroke="steelblue" stroke-width="1.5"/>'
        )
    max_weight = float(weights.max())
    for point, weight in zip(points, weights):
        x, y = to_px(point)
        radius = 2.0 + 4.0 * np.sqrt(weight / max_weight)
        parts.append(
            f'<circle class="scenario" cx="{x:.2f}" cy="{y:.2f}" r="{radius:.2f}" '
            f'fill="gray" fill-opacity="0.7"/>'
        )
    for index, center in enumerate(centers):
        x, y = to_px(center)
        parts.append(
            f'<g class="center"><path d="M {x - 5:.2f} {y:.2f} L {x + 5:.2f} {y:.2f} '
            f'M {x:.2f} {y - 5:.2f} L {x:.2f} {y + 5:.2f}" stroke="crimson" '
            f'stroke-width="2"/>'
            f'<text x="{x + 7:.2f}" y="{y - 7:.2f}" font-size="12">{index + 1}</text></g>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
