"""Minimal dependency-free SVG line charts for sweep results.

Cosmetic output only: nothing downstream consumes these files.
"""

from __future__ import annotations

import math

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 55


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s for s in (mag, 2 * mag, 2.5 * mag, 5 * mag, 10 * mag)
               if s >= raw)
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def write_line_chart(path, x, series: dict, title: str = "",
                     xlabel: str = "", ylabel: str = "") -> None:
    """Write a line chart with optional error bars.

    ``series`` maps a legend label to (y values, y errors or None).
    """
    xs = [float(v) for v in x]
    ys_all = [v for (ys, _) in series.values() for v in ys
              if v is not None and not math.isnan(v)]
    if not ys_all:
        ys_all = [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.08 * (y_hi - y_lo) or max(abs(y_hi), 1.0) * 0.1
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(v):
        return _ML + (v - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def sy(v):
        return _H - _MB - (v - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
             f'height="{_H}" viewBox="0 0 {_W} {_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>']
    axis = (f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
            'stroke="black"/>'
            f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
            'stroke="black"/>')
    parts.append(axis)
    for t in _ticks(x_lo, x_hi):
        px = sx(t)
        parts.append(f'<line x1="{px:.1f}" y1="{_H - _MB}" x2="{px:.1f}" '
                     f'y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{_H - _MB + 18}" font-size="11" '
                     f'text-anchor="middle">{t:g}</text>')
    for t in _ticks(y_lo, y_hi):
        py = sy(t)
        parts.append(f'<line x1="{_ML - 5}" y1="{py:.1f}" x2="{_ML}" '
                     f'y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{py + 4:.1f}" font-size="11" '
                     f'text-anchor="end">{t:g}</text>')
    if title:
        parts.append(f'<text x="{_W / 2}" y="22" font-size="14" '
                     f'text-anchor="middle">{title}</text>')
    if xlabel:
        parts.append(f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 12}" '
                     f'font-size="12" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{(_MT + _H - _MB) / 2}" font-size="12" '
                     f'text-anchor="middle" transform="rotate(-90 16 '
                     f'{(_MT + _H - _MB) / 2})">{ylabel}</text>')

    for idx, (label, (ys, errs)) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = [(sx(px), sy(py)) for px, py in zip(xs, ys)
               if py is not None and not math.isnan(py)]
        if len(pts) >= 2:
            path_d = " ".join(f"{px:.1f},{py:.1f}" for px, py in pts)
            parts.append(f'<polyline points="{path_d}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        for px, py in pts:
            parts.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="3" '
                         f'fill="{color}"/>')
        if errs is not None:
            for px, py, e in zip(xs, ys, errs):
                if py is None or e is None or math.isnan(py) or math.isnan(e):
                    continue
                parts.append(f'<line x1="{sx(px):.1f}" y1="{sy(py - e):.1f}" '
                             f'x2="{sx(px):.1f}" y2="{sy(py + e):.1f}" '
                             f'stroke="{color}" stroke-width="1"/>')
        ly = _MT + 14 + 16 * idx
        parts.append(f'<line x1="{_W - _MR - 120}" y1="{ly - 4}" '
                     f'x2="{_W - _MR - 96}" y2="{ly - 4}" stroke="{color}" '
                     'stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 90}" y="{ly}" font-size="11">'
                     f'{label}</text>')

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts) + "\n")
