"""Minimal deterministic SVG line charts (no plotting dependency).

Output is plain text with fixed number formatting, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf")


def _scale_points(ys: np.ndarray, x0: float, y0: float, w: float, h: float,
                  lo: float, hi: float) -> str:
    n = ys.size
    span = hi - lo if hi > lo else 1.0
    xs = x0 + w * (np.arange(n) / max(n - 1, 1))
    yy = y0 + h * (1.0 - (ys - lo) / span)
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, yy))


def line_chart(path, curves, title: str = "", width: int = 960, height: int = 320) -> None:
    """``curves`` is a list of (label, values) drawn on shared axes."""
    margin = 50
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    arrays = [np.asarray(y, dtype=np.float64) for _, y in curves]
    lo = min(float(np.min(a)) for a in arrays)
    hi = max(float(np.max(a)) for a in arrays)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
        f'<rect x="{margin}" y="{margin}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#999"/>',
        f'<text x="{margin - 6}" y="{margin + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{hi:.6g}</text>',
        f'<text x="{margin - 6}" y="{margin + plot_h + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{lo:.6g}</text>',
    ]
    for k, ((label, _), ys) in enumerate(zip(curves, arrays)):
        color = PALETTE[k % len(PALETTE)]
        pts = _scale_points(ys, margin, margin, plot_w, plot_h, lo, hi)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>')
        parts.append(
            f'<text x="{margin + 8 + 120 * k}" y="{height - 12}" fill="{color}" '
            f'font-family="sans-serif" font-size="11">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def stacked_chart(path, rows, title: str = "", width: int = 960, panel_height: int = 90) -> None:
    """One mini panel per (label, values) row, stacked vertically on a shared
    sample axis; used for decomposition stacks."""
    margin = 50
    top = 30
    plot_w = width - 2 * margin
    height = top + panel_height * len(rows) + 20

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
    ]
    for k, (label, values) in enumerate(rows):
        ys = np.asarray(values, dtype=np.float64)
        lo, hi = float(np.min(ys)), float(np.max(ys))
        y0 = top + k * panel_height
        inner = panel_height - 16
        color = PALETTE[k % len(PALETTE)]
        parts.append(f'<rect x="{margin}" y="{y0}" width="{plot_w}" height="{inner}" '
                     f'fill="none" stroke="#ccc"/>')
        parts.append(f'<text x="{margin - 6}" y="{y0 + inner / 2:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{label}</text>')
        pts = _scale_points(ys, margin, y0, plot_w, inner, lo, hi)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
