"""Minimal deterministic SVG line charts.

NaN values break a line into separate polylines instead of being bridged.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart", "small_multiples", "svg_line_panel"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf")


def _segments(y: np.ndarray):
    ok = np.isfinite(y)
    start = None
    for k, flag in enumerate(ok):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            yield start, k
            start = None
    if start is not None:
        yield start, len(y)


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [round(first + k * step, 10) for k in range(int((hi - first) / step + 1e-9) + 1)]


def svg_line_panel(x_labels: Sequence[str], series: Mapping[str, Sequence[float]], *,
                   title: str = "", x: float = 0, y: float = 0, width: float = 720,
                   height: float = 320, ylabel: str = "") -> list[str]:
    """SVG elements for one chart panel positioned at ``(x, y)``."""
    left, right, top, bottom = 56, 12, 28, 40
    pw, ph = width - left - right, height - top - bottom
    arrays = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    finite = np.concatenate([a[np.isfinite(a)] for a in arrays.values()] or [np.zeros(1)])
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    n = max(len(x_labels), 2)

    def px(k):
        return x + left + pw * k / (n - 1)

    def py(v):
        return y + top + ph * (1.0 - (v - lo) / (hi - lo))

    out = [f'<g class="panel">',
           f'<rect x="{x + left:.2f}" y="{y + top:.2f}" width="{pw:.2f}" height="{ph:.2f}" '
           f'fill="none" stroke="#444" stroke-width="0.8"/>']
    if title:
        out.append(f'<text x="{x + left + pw / 2:.2f}" y="{y + 18:.2f}" text-anchor="middle" '
                   f'font-size="13">{escape(title)}</text>')
    for tick in _nice_ticks(lo, hi):
        ty = py(tick)
        out.append(f'<line x1="{x + left:.2f}" y1="{ty:.2f}" x2="{x + left + pw:.2f}" '
                   f'y2="{ty:.2f}" stroke="#ddd" stroke-width="0.5"/>')
        out.append(f'<text x="{x + left - 4:.2f}" y="{ty + 4:.2f}" text-anchor="end" '
                   f'font-size="10">{tick:g}</text>')
    if lo < 0 < hi:
        out.append(f'<line x1="{x + left:.2f}" y1="{py(0):.2f}" x2="{x + left + pw:.2f}" '
                   f'y2="{py(0):.2f}" stroke="#888" stroke-width="0.8"/>')
    if len(x_labels):
        for k in sorted({0, len(x_labels) // 2, len(x_labels) - 1}):
            out.append(f'<text x="{px(k):.2f}" y="{y + top + ph + 16:.2f}" '
                       f'text-anchor="middle" font-size="10">{escape(str(x_labels[k]))}</text>')
    if ylabel:
        out.append(f'<text x="{x + 14:.2f}" y="{y + top + ph / 2:.2f}" font-size="10" '
                   f'transform="rotate(-90 {x + 14:.2f} {y + top + ph / 2:.2f})" '
                   f'text-anchor="middle">{escape(ylabel)}</text>')
    for c, (label, arr) in enumerate(arrays.items()):
        color = PALETTE[c % len(PALETTE)]
        for a, b in _segments(arr):
            pts = " ".join(f"{px(k):.2f},{py(arr[k]):.2f}" for k in range(a, b))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                       f'data-series="{escape(label)}" points="{pts}"/>')
    if len(arrays) > 1:
        for c, label in enumerate(arrays):
            lx = x + left + 8 + 110 * c
            ly = y + top + ph + 32
            out.append(f'<rect x="{lx:.2f}" y="{ly - 8:.2f}" width="10" height="3" '
                       f'fill="{PALETTE[c % len(PALETTE)]}"/>')
            out.append(f'<text x="{lx + 14:.2f}" y="{ly - 4:.2f}" font-size="10">'
                       f'{escape(label)}</text>')
    out.append("</g>")
    return out


def _document(width: float, height: float, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
            f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}" '
            f'font-family="sans-serif">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body,
                      "</svg>"]) + "\n"


def line_chart(path, x_labels: Sequence[str], series: Mapping[str, Sequence[float]], *,
               title: str = "", ylabel: str = "", width: float = 760,
               height: float = 340) -> str:
    """Write a single-panel chart; returns the SVG text."""
    text = _document(width, height, svg_line_panel(x_labels, series, title=title,
                                                   width=width, height=height, ylabel=ylabel))
    if path is not None:
        Path(path).write_text(text)
    return text


def small_multiples(path, x_labels: Sequence[str], panels: Mapping[str, Sequence[float]], *,
                    columns: int = 2, panel_width: float = 380, panel_height: float = 220,
                    ylabel: str = "") -> str:
    """One single-series panel per entry of ``panels``, laid out on a grid."""
    rows = max(1, math.ceil(len(panels) / columns))
    body = []
    for k, (title, values) in enumerate(panels.items()):
        r, c = divmod(k, columns)
        body += svg_line_panel(x_labels, {title: values}, title=title, x=c * panel_width,
                               y=r * panel_height, width=panel_width, height=panel_height,
                               ylabel=ylabel)
    text = _document(columns * panel_width, rows * panel_height, body)
    if path is not None:
        Path(path).write_text(text)
    return text
