"""Standalone SVG line charts: mean line with a min-max band per curve."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 760, 460
LEFT, RIGHT, TOP, BOTTOM = 70, 200, 50, 55


def nice_ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks, v = [], start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if v != int(v) else str(int(v))


def render_plot(curves, out_path, title: str = "cumulative regret") -> Path:
    """Write an SVG chart of cumulative regret against round."""
    curves = list(curves)
    if not curves:
        raise ValueError("nothing to plot: no curves given")
    x_hi = max(float(np.max(c.rounds)) for c in curves)
    x_lo = min(float(np.min(c.rounds)) for c in curves)
    y_lo = min(0.0, min(float(np.min(c.lo)) for c in curves))
    y_hi = max(float(np.max(c.hi)) for c in curves)
    xt, yt = nice_ticks(x_lo, x_hi), nice_ticks(y_lo, y_hi)
    x0, x1 = min(xt[0], x_lo), max(xt[-1], x_hi)
    y0, y1 = min(yt[0], y_lo), max(yt[-1], y_hi)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / ((x1 - x0) or 1.0) * pw

    def sy(v):
        return TOP + ph - (v - y0) / ((y1 - y0) or 1.0) * ph

    def pts(xs, ys):
        return " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{LEFT}" y="22" font-size="15">{escape(title)}</text>',
        f'<text x="{LEFT}" y="38" font-size="11" fill="#555">qualitative replication: '
        'solid line = mean over repeats, band = min to max</text>',
    ]
    for v in xt:
        out.append(f'<line x1="{sx(v):.2f}" y1="{TOP}" x2="{sx(v):.2f}" y2="{TOP + ph}" stroke="#eee"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{TOP + ph + 16}" text-anchor="middle">{_fmt(v)}</text>')
    for v in yt:
        out.append(f'<line x1="{LEFT}" y1="{sy(v):.2f}" x2="{LEFT + pw}" y2="{sy(v):.2f}" stroke="#eee"/>')
        out.append(f'<text x="{LEFT - 6}" y="{sy(v) + 4:.2f}" text-anchor="end">{_fmt(v)}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">round</text>')
    out.append(f'<text transform="translate(18 {TOP + ph / 2}) rotate(-90)" '
               'text-anchor="middle">cumulative regret</text>')

    for i, c in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        xs = np.asarray(c.rounds, dtype=float)
        band = pts(xs, c.hi) + " " + pts(xs[::-1], np.asarray(c.lo)[::-1])
        out.append(f'<polygon class="band" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline class="mean" points="{pts(xs, c.mean)}" fill="none" '
                   f'stroke="{color}" stroke-width="2"/>')
        ly = TOP + 14 + 20 * i
        lx = LEFT + pw + 14
        out.append(f'<g class="legend"><line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>'
                   f'<text x="{lx + 28}" y="{ly + 4}">{escape(c.label)}</text></g>')
    out.append("</svg>")

    path = Path(out_path)
    path.write_text("\n".join(out) + "\n")
    return path
