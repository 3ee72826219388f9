"""Static SVG figures written directly from the plotted arrays.

Each panel is a nested ``<svg>`` whose viewBox is the data window, so point
coordinates are emitted unchanged in the same ``%.17g`` format as the CSV
files. Scatter markers are one-pixel rectangles; lines are polylines with
non-scaling strokes.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

PANEL_WIDTH = 360
PANEL_HEIGHT = 260
MARGIN_LEFT = 64
MARGIN_RIGHT = 16
MARGIN_TOP = 28
MARGIN_BOTTOM = 44
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def fmt(x):
    """Full double precision text of ``x``, shared by CSV and SVG output."""
    return format(float(x), ".17g")


@dataclass
class Series:
    """One plotted data set.

    Attributes
    ----------
    x, y : array
    kind : {"line", "scatter"}
    color : str
    label : str
    dashed : bool
    """

    x: np.ndarray
    y: np.ndarray
    kind: str = "line"
    color: str = PALETTE[0]
    label: str = ""
    dashed: bool = False


@dataclass
class Panel:
    series: list = field(default_factory=list)
    xlim: tuple = None
    ylim: tuple = None
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""


def _limits(values, lim):
    if lim is not None:
        return float(lim[0]), float(lim[1])
    v = np.concatenate([np.asarray(a, dtype=float).ravel() for a in values]) if values else np.zeros(0)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return -1.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    pad = 0.05 * (hi - lo) if hi > lo else max(0.5, 0.05 * abs(lo))
    return lo - pad, hi + pad


def _escape(text):
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _finite_runs(x, y):
    ok = np.isfinite(x) & np.isfinite(y)
    runs, start = [], None
    for i, flag in enumerate(ok):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(ok)))
    return runs


def _panel(p, ox, oy):
    x0, x1 = _limits([s.x for s in p.series], p.xlim)
    y0, y1 = _limits([s.y for s in p.series], p.ylim)
    w = PANEL_WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    px, py = ox + MARGIN_LEFT, oy + MARGIN_TOP
    out = ['<g font-family="sans-serif" font-size="11">']
    out.append(f'<rect fill="white" stroke="black" x="{px}" y="{py}" width="{w}" height="{h}"/>')
    for frac in (0.0, 0.5, 1.0):
        tx = px + frac * w
        ty = py + h - frac * h
        out.append(f'<text x="{tx:g}" y="{py + h + 14}" text-anchor="middle">{x0 + frac * (x1 - x0):.4g}</text>')
        out.append(f'<text x="{px - 4}" y="{ty + 4:g}" text-anchor="end">{y0 + frac * (y1 - y0):.4g}</text>')
    out.append(f'<text x="{px + w / 2:g}" y="{py + h + 32}" text-anchor="middle">{_escape(p.xlabel)}</text>')
    out.append(f'<text x="{ox + 14}" y="{py + h / 2:g}" text-anchor="middle" '
               f'transform="rotate(-90 {ox + 14} {py + h / 2:g})">{_escape(p.ylabel)}</text>')
    out.append(f'<text x="{px + w / 2:g}" y="{oy + 18}" text-anchor="middle">{_escape(p.title)}</text>')
    # data window: y is flipped by the group transform so values stay verbatim
    out.append(f'<svg x="{px}" y="{py}" width="{w}" height="{h}" '
               f'viewBox="{fmt(x0)} {fmt(-y1)} {fmt(x1 - x0)} {fmt(y1 - y0)}" preserveAspectRatio="none">')
    out.append('<g transform="scale(1,-1)">')
    mx = (x1 - x0) / w
    my = (y1 - y0) / h
    for s in p.series:
        x = np.asarray(s.x, dtype=float)
        y = np.asarray(s.y, dtype=float)
        if s.kind == "scatter":
            out.append(f'<g class="scatter" fill="{s.color}">')
            for xi, yi in zip(x, y):
                if math.isfinite(xi) and math.isfinite(yi):
                    out.append(f'<rect x="{fmt(xi)}" y="{fmt(yi)}" width="{fmt(mx)}" height="{fmt(my)}"/>')
            out.append('</g>')
        else:
            dash = ' stroke-dasharray="5,3"' if s.dashed else ""
            for a, b in _finite_runs(x, y):
                pts = " ".join(f"{fmt(x[i])},{fmt(y[i])}" for i in range(a, b))
                out.append(f'<polyline class="line" points="{pts}" fill="none" stroke="{s.color}" '
                           f'stroke-width="1.2" vector-effect="non-scaling-stroke"{dash}/>')
    out.append('</g></svg>')
    labels = [s for s in p.series if s.label]
    for i, s in enumerate(labels):
        out.append(f'<text x="{px + w - 4}" y="{py + 14 + 13 * i}" text-anchor="end" '
                   f'fill="{s.color}">{_escape(s.label)}</text>')
    out.append('</g>')
    return out


def render(panels, ncols=1):
    """SVG document for ``panels`` laid out row-major in ``ncols`` columns."""
    ncols = max(1, min(ncols, len(panels)))
    nrows = (len(panels) + ncols - 1) // ncols
    W, H = ncols * PANEL_WIDTH, nrows * PANEL_HEIGHT
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">']
    for k, p in enumerate(panels):
        out.extend(_panel(p, (k % ncols) * PANEL_WIDTH, (k // ncols) * PANEL_HEIGHT))
    out.append('</svg>')
    return "\n".join(out) + "\n"


def write_svg(path, panels, ncols=1):
    with open(path, "w") as fh:
        fh.write(render(panels, ncols))


def svg_points(text):
    """Data points ``(x, y)`` as strings, in document order; used to audit figures."""
    pts = re.findall(r'<rect x="([^"]+)" y="([^"]+)" width', text)
    for line in re.findall(r'points="([^"]+)"', text):
        pts.extend(tuple(p.split(",")) for p in line.split())
    return pts
