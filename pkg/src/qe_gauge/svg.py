"""Minimal deterministic SVG line plots.

Figures are convenience artifacts; the CSV exports remain canonical.  The
renderer draws axes with five ticks per side, an optional confidence band
polygon, and one curve.  All coordinates are formatted to two decimals so
identical inputs produce byte-identical files.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

WIDTH = 640.0
HEIGHT = 420.0
MARGIN_LEFT = 64.0
MARGIN_RIGHT = 16.0
MARGIN_TOP = 30.0
MARGIN_BOTTOM = 46.0
N_TICKS = 5

_BAND_FILL = "#c9d9f0"
_CURVE_STROKE = "#1f4e9c"
_AXIS_STROKE = "#222222"


def _fmt(v: float) -> str:
    return format(v, ".2f")


def _tick_label(v: float) -> str:
    return format(v, ".3g")


class _Scale:
    """Affine map from data coordinates to pixel coordinates."""

    def __init__(self, lo: float, hi: float, px_lo: float, px_hi: float):
        if hi <= lo:
            # Flat data: widen to a unit window so the map stays invertible.
            mid = lo
            lo, hi = mid - 0.5, mid + 0.5
        self.lo = lo
        self.hi = hi
        self.px_lo = px_lo
        self.px_hi = px_hi

    def __call__(self, v: float) -> float:
        t = (v - self.lo) / (self.hi - self.lo)
        return self.px_lo + t * (self.px_hi - self.px_lo)

    def ticks(self) -> list:
        step = (self.hi - self.lo) / (N_TICKS - 1)
        return [self.lo + i * step for i in range(N_TICKS)]


def line_plot_svg(
    x: Sequence[float],
    y: Sequence[float],
    band: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
) -> str:
    """Render one curve (and an optional lo/hi band) as an SVG document."""
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need at least two points with matching lengths")
    y_all = list(ys)
    if band is not None:
        lo, hi = ([float(v) for v in band[0]], [float(v) for v in band[1]])
        if len(lo) != len(xs) or len(hi) != len(xs):
            raise ValueError("band arrays must match the x grid")
        y_all += lo + hi
    pad = 0.05 * (max(y_all) - min(y_all))
    sx = _Scale(min(xs), max(xs), MARGIN_LEFT, WIDTH - MARGIN_RIGHT)
    sy = _Scale(min(y_all) - pad, max(y_all) + pad, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(WIDTH)}" '
        f'height="{_fmt(HEIGHT)}" viewBox="0 0 {_fmt(WIDTH)} {_fmt(HEIGHT)}">',
        f'<rect width="{_fmt(WIDTH)}" height="{_fmt(HEIGHT)}" fill="#ffffff"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_fmt(WIDTH / 2)}" y="20" text-anchor="middle" '
            f'font-family="monospace" font-size="13">{_escape(title)}</text>')
    if band is not None:
        pts = [f"{_fmt(sx(xv))},{_fmt(sy(hv))}" for xv, hv in zip(xs, hi)]
        pts += [f"{_fmt(sx(xv))},{_fmt(sy(lv))}" for xv, lv in zip(reversed(xs), reversed(lo))]
        parts.append(f'<polygon points="{" ".join(pts)}" fill="{_BAND_FILL}" stroke="none"/>')
    curve = " ".join(f"{_fmt(sx(xv))},{_fmt(sy(yv))}" for xv, yv in zip(xs, ys))
    parts.append(
        f'<polyline points="{curve}" fill="none" stroke="{_CURVE_STROKE}" stroke-width="1.5"/>')

    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    parts.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(WIDTH - MARGIN_RIGHT)}" '
        f'y2="{_fmt(y0)}" stroke="{_AXIS_STROKE}" stroke-width="1"/>')
    parts.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" '
        f'y2="{_fmt(MARGIN_TOP)}" stroke="{_AXIS_STROKE}" stroke-width="1"/>')
    for tv in sx.ticks():
        px = sx(tv)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(y0)}" x2="{_fmt(px)}" y2="{_fmt(y0 + 5)}" '
            f'stroke="{_AXIS_STROKE}" stroke-width="1"/>')
        parts.append(
            f'<text x="{_fmt(px)}" y="{_fmt(y0 + 18)}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">{_tick_label(tv)}</text>')
    for tv in sy.ticks():
        py = sy(tv)
        parts.append(
            f'<line x1="{_fmt(x0 - 5)}" y1="{_fmt(py)}" x2="{_fmt(x0)}" y2="{_fmt(py)}" '
            f'stroke="{_AXIS_STROKE}" stroke-width="1"/>')
        parts.append(
            f'<text x="{_fmt(x0 - 8)}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{_tick_label(tv)}</text>')
    if x_label:
        parts.append(
            f'<text x="{_fmt((x0 + WIDTH - MARGIN_RIGHT) / 2)}" y="{_fmt(HEIGHT - 8)}" '
            f'text-anchor="middle" font-family="monospace" font-size="12">'
            f'{_escape(x_label)}</text>')
    if y_label:
        cy = (MARGIN_TOP + y0) / 2
        parts.append(
            f'<text x="14" y="{_fmt(cy)}" text-anchor="middle" font-family="monospace" '
            f'font-size="12" transform="rotate(-90 14 {_fmt(cy)})">{_escape(y_label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))
