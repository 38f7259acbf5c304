"""Minimal static SVG line charts (deterministic text output, no plotting dependency)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    xlabel: str,
    ylabel: str,
    title: str = "",
    width: int = 640,
    height: int = 400,
) -> str:
    """Render ``(label, x, y)`` series as one SVG document."""
    if not series:
        raise ValueError("nothing to plot")
    margin_l, margin_r, margin_t, margin_b = 70, 20, 30, 50
    xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in series])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, _, y in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(min(ys.min(), 0.0)), float(max(ys.max(), 0.0))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw = width - margin_l - margin_r
    ph = height - margin_t - margin_b

    def px(x):
        return margin_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return margin_t + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
        f'<line x1="{margin_l}" y1="{_fmt(py(0.0))}" x2="{margin_l + pw}" y2="{_fmt(py(0.0))}" '
        'stroke="#999" stroke-dasharray="4 3"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        out.append(f'<text x="{_fmt(px(xv))}" y="{height - margin_b + 16}" text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{margin_l - 6}" y="{_fmt(py(yv) + 4)}" text-anchor="end">{yv:.4g}</text>')
    out.append(f'<text x="{margin_l + pw / 2:.2f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(
        f'<text x="16" y="{margin_t + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {margin_t + ph / 2:.2f})">{ylabel}</text>'
    )
    if title:
        out.append(f'<text x="{width / 2:.2f}" y="18" text-anchor="middle">{title}</text>')
    for i, (label, x, y) in enumerate(series):
        colour = _COLOURS[i % len(_COLOURS)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        out.append(
            f'<text x="{margin_l + 8}" y="{margin_t + 16 + 14 * i}" fill="{colour}">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path: str | Path, *args, **kwargs) -> None:
    Path(path).write_text(line_chart(*args, **kwargs), encoding="utf-8")
