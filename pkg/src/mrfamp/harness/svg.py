"""Hand-written SVG: a line plot and a panel of grayscale heatmaps.

No timestamps are written, so the output is a pure function of the input.
"""

from __future__ import annotations

import html
import math

import numpy as np

from .io import atomic_write_text, config_json

__all__ = ["line_plot", "heatmap_panel", "write_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _num(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _header(width, height, title, config):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">'
    ]
    if config is not None:
        out.append(f"<desc>{html.escape(config_json(config))}</desc>")
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{html.escape(title)}</text>')
    return out


def line_plot(series: dict, xlabel="iteration", ylabel="MSE", title="", logy=True,
              width=560, height=380, config=None) -> str:
    """``series`` maps a label to ``(x, y)``; optional ``style`` per label via ``label|dashed``."""
    left, right, top, bottom = 70, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    ys_ok = ys[np.isfinite(ys) & ((ys > 0) if logy else np.isfinite(ys))]
    x0, x1 = float(xs.min()), float(xs.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if logy:
        lo, hi = math.floor(math.log10(ys_ok.min())), math.ceil(math.log10(ys_ok.max()))
        if hi == lo:
            hi = lo + 1
        fy = lambda v: top + ph * (hi - math.log10(v)) / (hi - lo)  # noqa: E731
        yticks = [(top + ph * (hi - e) / (hi - lo), f"1e{e}") for e in range(lo, hi + 1)]
    else:
        lo, hi = float(min(ys_ok.min(), 0.0)), float(ys_ok.max()) or 1.0
        fy = lambda v: top + ph * (hi - v) / (hi - lo)  # noqa: E731
        yticks = [(fy(lo + (hi - lo) * i / 4), _num(lo + (hi - lo) * i / 4)) for i in range(5)]
    fx = lambda v: left + pw * (v - x0) / (x1 - x0)  # noqa: E731

    out = _header(width, height, title, config)
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for y, label in yticks:
        out.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{label}</text>')
    for v in np.unique(np.round(xs)):
        x = fx(float(v))
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 17}" text-anchor="middle">{int(v)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{html.escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{html.escape(ylabel)}</text>')
    for n, (label, (x, y)) in enumerate(series.items()):
        name, _, style = label.partition("|")
        color = _COLORS[n % len(_COLORS)]
        dash = ' stroke-dasharray="6 4"' if style == "dashed" else ""
        pts = [(fx(float(a)), fy(float(b))) for a, b in zip(x, y) if np.isfinite(b) and (b > 0 or not logy)]
        path = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        for a, b in pts:
            out.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="2.5" fill="{color}"/>')
        ly = top + 14 + 18 * n
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 36}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{left + pw + 40}" y="{ly + 4}">{html.escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap_panel(images: dict, cell=2, levels=16, title="", config=None) -> str:
    """Grayscale panel, one image per entry, values clipped to [0, 1].

    Pixels are quantized to ``levels`` grays and each row is run-length
    encoded into rectangles to keep the file small.
    """
    gap, top, label_h = 12, 30, 18
    sizes = [np.asarray(im).shape[0] for im in images.values()]
    width = gap + sum(s * cell + gap for s in sizes)
    height = top + label_h + max(sizes) * cell + gap
    out = _header(width, height, title, config)
    x = gap
    for (label, im), side in zip(images.items(), sizes):
        im = np.clip(np.asarray(im, dtype=float), 0.0, 1.0)
        q = np.rint(im * (levels - 1)).astype(int)
        y0 = top + label_h
        out.append(f'<text x="{x + side * cell / 2:.1f}" y="{top + 12}" text-anchor="middle">{html.escape(label)}</text>')
        out.append(f'<g transform="translate({x},{y0})" shape-rendering="crispEdges">')
        for r in range(side):
            row = q[r]
            c = 0
            while c < side:
                e = c
                while e + 1 < side and row[e + 1] == row[c]:
                    e += 1
                g = int(round(255 * row[c] / (levels - 1)))
                out.append(f'<rect x="{c * cell}" y="{r * cell}" width="{(e - c + 1) * cell}" height="{cell}" '
                           f'fill="rgb({g},{g},{g})"/>')
                c = e + 1
        out.append("</g>")
        x += side * cell + gap
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text: str):
    return atomic_write_text(path, text)
