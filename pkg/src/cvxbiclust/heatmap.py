"""Deterministic SVG heatmap of a smoothed estimate, sorted by cluster.

Rows and columns are reordered by (cluster label, original index); cells
are colored on a blue-white-red scale symmetric about the grand mean, and
cluster boundaries are drawn as black rules.  Output is plain SVG text
with fixed number formatting, so identical inputs give identical bytes.
"""

from __future__ import annotations

import numpy as np

from .core import Partition, as_matrix

CELL = 12  # px per matrix cell
_NEG = (33, 102, 172)   # blue
_MID = (247, 247, 247)  # near white
_POS = (178, 24, 43)    # red


def _lerp(a, b, t: float) -> tuple[int, int, int]:
    return tuple(int(round(a[i] + (b[i] - a[i]) * t)) for i in range(3))


def _color(value: float, center: float, radius: float) -> str:
    if radius <= 0:
        t = 0.0
    else:
        t = (value - center) / radius
    t = min(1.0, max(-1.0, t))
    rgb = _lerp(_MID, _POS, t) if t >= 0 else _lerp(_MID, _NEG, -t)
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def cluster_order(part: Partition) -> np.ndarray:
    """Object order: by cluster label, then original index."""
    idx = np.arange(part.q)
    return idx[np.lexsort((idx, part.labels))]


def render_heatmap_svg(
    U: np.ndarray, row_part: Partition, col_part: Partition
) -> str:
    """SVG text for the cluster-sorted heatmap of U with boundary rules."""
    U = as_matrix(U)
    p, n = U.shape
    if row_part.q != p or col_part.q != n:
        raise ValueError("partitions do not match the matrix shape")

    row_order = cluster_order(row_part)
    col_order = cluster_order(col_part)
    center = float(U.mean())
    radius = float(np.abs(U - center).max())

    width, height = n * CELL, p * CELL
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    for r, i in enumerate(row_order):
        for c, j in enumerate(col_order):
            out.append(
                f'<rect x="{c * CELL}" y="{r * CELL}" width="{CELL}" height="{CELL}" '
                f'fill="{_color(float(U[i, j]), center, radius)}"/>'
            )

    # black rules between consecutive objects of different clusters
    row_labels = row_part.labels[row_order]
    col_labels = col_part.labels[col_order]
    for r in range(1, p):
        if row_labels[r] != row_labels[r - 1]:
            y = r * CELL
            out.append(
                f'<line x1="0" y1="{y}" x2="{width}" y2="{y}" stroke="#000000" stroke-width="1"/>'
            )
    for c in range(1, n):
        if col_labels[c] != col_labels[c - 1]:
            x = c * CELL
            out.append(
                f'<line x1="{x}" y1="0" x2="{x}" y2="{height}" stroke="#000000" stroke-width="1"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
