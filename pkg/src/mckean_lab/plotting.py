"""Dependency-free static SVG line plots."""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=72, right=170, top=36, bottom=52)


@dataclass(frozen=True)
class Series:
    label: str
    x: tuple
    y: tuple

    @classmethod
    def of(cls, label, x, y) -> "Series":
        x = tuple(float(v) for v in x)
        y = tuple(float(v) for v in y)
        if len(x) != len(y):
            raise ValueError(f"series {label!r}: x and y lengths differ")
        return cls(label, x, y)


def _ticks(lo: float, hi: float, k: int = 5) -> list[float]:
    span = hi - lo
    raw = span / k
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * span:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def emit_svg(series, path, title: str = "", xlabel: str = "x", ylabel: str = "y",
             hlines=()) -> None:
    """Write ``series`` (Series or (label, x, y) tuples) as line curves.

    ``hlines`` is a sequence of ``(y, label)`` dashed reference lines.
    """
    series = [s if isinstance(s, Series) else Series.of(*s) for s in series]
    if not series:
        raise ValueError("nothing to plot")
    xs = np.concatenate([np.asarray(s.x) for s in series])
    ys = np.concatenate([np.asarray(s.y) for s in series] + [np.array([h[0] for h in hlines], dtype=float)])
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    if xs.size == 0 or ys.size == 0:
        raise ValueError("no finite data to plot")
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]

    def px(v):
        return L + (v - x0) / (x1 - x0) * (R - L)

    def py(v):
        return B - (v - y0) / (y1 - y0) * (B - T)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{(L + R) / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<g class="axes" stroke="black" fill="none">'
               f'<line x1="{L}" y1="{B}" x2="{R}" y2="{B}"/><line x1="{L}" y1="{T}" x2="{L}" y2="{B}"/></g>')
    for v in _ticks(x0, x1):
        out.append(f'<line x1="{px(v):.1f}" y1="{B}" x2="{px(v):.1f}" y2="{B + 5}" stroke="black"/>'
                   f'<text x="{px(v):.1f}" y="{B + 18}" text-anchor="middle">{_fmt(v)}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<line x1="{L - 5}" y1="{py(v):.1f}" x2="{L}" y2="{py(v):.1f}" stroke="black"/>'
                   f'<text x="{L - 8}" y="{py(v) + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')
    out.append(f'<text x="{(L + R) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(T + B) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(T + B) / 2:.1f})">{escape(ylabel)}</text>')

    legend = []
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x, s.y)
                       if math.isfinite(a) and math.isfinite(b))
        out.append(f'<polyline class="series" fill="none" stroke="{color}" stroke-width="1.6" points="{pts}"/>')
        legend.append((s.label, color, ""))
    for j, (yv, label) in enumerate(hlines):
        color = "#555555"
        out.append(f'<line class="reference" x1="{L}" y1="{py(yv):.2f}" x2="{R}" y2="{py(yv):.2f}" '
                   f'stroke="{color}" stroke-dasharray="6,4"/>')
        legend.append((label, color, "6,4"))
    out.append('<g class="legend">')
    for k, (label, color, dash) in enumerate(legend):
        y = T + 10 + 18 * k
        d = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{R + 12}" y1="{y}" x2="{R + 36}" y2="{y}" stroke="{color}" stroke-width="2"{d}/>'
                   f'<text x="{R + 42}" y="{y + 4}">{escape(label)}</text>')
    out.append("</g></svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
