"""Minimal SVG line plots.

Enough for the figure recipes: one or more traces on linear or log axes with
tick labels, a title and a legend.  Output text depends only on the data, so
repeated runs produce identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from xml.sax.saxutils import escape

import numpy as np

from .io import atomic_write_text

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Trace:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    markers: bool = False


@dataclass
class Figure:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    width: int = 640
    height: int = 420
    traces: list[Trace] = dc_field(default_factory=list)

    def add(self, x, y, label: str = "", markers: bool = False) -> "Figure":
        self.traces.append(Trace(np.asarray(x, dtype=float), np.asarray(y, dtype=float), label, markers))
        return self


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _range(values: np.ndarray, log: bool) -> tuple[float, float]:
    v = values[np.isfinite(values)]
    if log:
        v = v[v > 0]
    if v.size == 0:
        return (0.0, 1.0)
    lo, hi = float(v.min()), float(v.max())
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def render_svg(fig: Figure) -> str:
    ml, mr, mt, mb = 72, 20, 36, 52
    w, h = fig.width, fig.height
    pw, ph = w - ml - mr, h - mt - mb
    xs = np.concatenate([t.x for t in fig.traces]) if fig.traces else np.zeros(1)
    ys = np.concatenate([t.y for t in fig.traces]) if fig.traces else np.zeros(1)
    x0, x1 = _range(xs, fig.xlog)
    y0, y1 = _range(ys, fig.ylog)

    def px(x):
        v = np.log10(x) if fig.xlog else x
        return ml + (v - x0) / (x1 - x0) * pw

    def py(y):
        v = np.log10(y) if fig.ylog else y
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in _ticks(x0, x1):
        X = ml + (v - x0) / (x1 - x0) * pw
        lab = f"{10 ** v:.3g}" if fig.xlog else f"{v:.4g}"
        out.append(f'<line x1="{X:.2f}" y1="{mt + ph}" x2="{X:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{mt + ph + 18}" text-anchor="middle">{lab}</text>')
    for v in _ticks(y0, y1):
        Y = mt + ph - (v - y0) / (y1 - y0) * ph
        lab = f"{10 ** v:.3g}" if fig.ylog else f"{v:.4g}"
        out.append(f'<line x1="{ml - 5}" y1="{Y:.2f}" x2="{ml}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y + 4:.2f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{h - 12}" text-anchor="middle">{escape(fig.xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(fig.ylabel)}</text>')
    out.append(f'<text x="{w / 2:.1f}" y="22" text-anchor="middle" font-size="13">{escape(fig.title)}</text>')
    for k, t in enumerate(fig.traces):
        color = PALETTE[k % len(PALETTE)]
        ok = np.isfinite(t.x) & np.isfinite(t.y)
        if fig.xlog:
            ok &= t.x > 0
        if fig.ylog:
            ok &= t.y > 0
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(t.x[ok]), py(t.y[ok])))
        if t.markers:
            out += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.5" fill="{color}"/>'
                    for a, b in zip(px(t.x[ok]), py(t.y[ok]))]
        else:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{pts}"/>')
        if t.label:
            ly = mt + 14 + 14 * k
            out.append(f'<line x1="{ml + pw - 120}" y1="{ly - 4}" x2="{ml + pw - 100}" y2="{ly - 4}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{ml + pw - 95}" y="{ly}">{escape(t.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save_svg(fig: Figure, path):
    return atomic_write_text(path, render_svg(fig))
