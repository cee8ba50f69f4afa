"""Minimal self-contained SVG line plots (800 x 500, legend block)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 500
LEFT, RIGHT, TOP, BOTTOM = 80, 180, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
          "#bcbd22", "#17becf")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def line_plot(series, title: str, xlabel: str, ylabel: str, log_x: bool = False) -> str:
    """`series`: list of (label, x, y, band or None), where band is the
    half-width of a shaded region around y. Returns the SVG text."""
    xs = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    if log_x:
        if np.any(xs <= 0):
            raise ValueError("log axis needs positive x")
        xs = np.log10(xs)
    lows, highs = [], []
    for _, _, y, band in series:
        y = np.asarray(y, dtype=float)
        b = np.zeros_like(y) if band is None else np.asarray(band, dtype=float)
        lows.append(np.nanmin(y - b))
        highs.append(np.nanmax(y + b))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(min(lows)), float(max(highs))
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        x = math.log10(x) if log_x else x
        return LEFT + (x - x0) / (x1 - x0) * pw

    def py(y):
        return TOP + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{LEFT + pw / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    xt = [10.0**e for e in range(math.ceil(x0), math.floor(x1) + 1)] if log_x else _ticks(x0, x1)
    for t in xt:
        X = px(t)
        out.append(f'<line x1="{X:.1f}" y1="{TOP + ph}" x2="{X:.1f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.1f}" y="{TOP + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{LEFT - 5}" y1="{Y:.1f}" x2="{LEFT}" y2="{Y:.1f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{Y + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')

    for i, (label, x, y, band) in enumerate(series):
        c = COLORS[i % len(COLORS)]
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if band is not None:
            b = np.asarray(band, dtype=float)
            upper = [f"{px(a):.2f},{py(v):.2f}" for a, v in zip(x, y + b)]
            lower = [f"{px(a):.2f},{py(v):.2f}" for a, v in zip(x[::-1], (y - b)[::-1])]
            out.append(f'<polygon class="band" points="{" ".join(upper + lower)}" fill="{c}" '
                       f'fill-opacity="0.15" stroke="none"/>')
        pts = " ".join(f"{px(a):.2f},{py(v):.2f}" for a, v in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="2">'
                   f'<title>{escape(label)}</title></polyline>')
        ly = TOP + 10 + 20 * i
        lx = WIDTH - RIGHT + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 32}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
