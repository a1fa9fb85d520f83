"""Static SVG line charts for impulse responses, written by hand."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 480, 320
MARGIN = dict(left=56, right=16, top=32, bottom=40)


def _scale(lo: float, hi: float, a: float, b: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (np.asarray(v, dtype=float) - lo) / span * (b - a)


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    raw = (hi - lo) / max(n, 1)
    if raw <= 0:
        return np.array([lo])
    mag = 10 ** np.floor(np.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=raw)
    return np.arange(np.ceil(lo / step) * step, hi + step * 1e-9, step)


def _path(xs, ys) -> str:
    return " ".join(f"{'M' if i == 0 else 'L'}{x:.2f},{y:.2f}" for i, (x, y) in enumerate(zip(xs, ys)))


def _band(xs, lo, hi) -> str:
    pts = list(zip(xs, hi)) + list(zip(xs[::-1], lo[::-1]))
    return " ".join(f"{'M' if i == 0 else 'L'}{x:.2f},{y:.2f}" for i, (x, y) in enumerate(pts)) + " Z"


def irf_svg(irf, title: str = "") -> str:
    """Point estimate with shaded 68% and 90% bands and a zero line."""
    h = np.asarray(irf.horizons, dtype=float)
    lo90, hi90 = np.asarray(irf.lo90), np.asarray(irf.hi90)
    ymin = float(min(lo90.min(), 0.0))
    ymax = float(max(hi90.max(), 0.0))
    pad = 0.05 * (ymax - ymin or 1.0)
    ymin, ymax = ymin - pad, ymax + pad
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    sx = _scale(h.min(), h.max(), x0, x1)
    sy = _scale(ymin, ymax, y0, y1)
    xs = sx(h)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<path d="{_band(xs, sy(lo90), sy(hi90))}" fill="#c6dbef" stroke="none"/>',
        f'<path d="{_band(xs, sy(irf.lo68), sy(irf.hi68))}" fill="#6baed6" stroke="none"/>',
        f'<line x1="{x0}" x2="{x1}" y1="{float(sy(0.0)):.2f}" y2="{float(sy(0.0)):.2f}" '
        'stroke="#444" stroke-dasharray="4 3"/>',
        f'<path d="{_path(xs, sy(irf.beta))}" fill="none" stroke="#08306b" stroke-width="2"/>',
        f'<line x1="{x0}" x2="{x0}" y1="{y0}" y2="{y1}" stroke="black"/>',
        f'<line x1="{x0}" x2="{x1}" y1="{y0}" y2="{y0}" stroke="black"/>',
    ]
    for t in _ticks(ymin, ymax):
        y = float(sy(t))
        parts.append(f'<line x1="{x0 - 4}" x2="{x0}" y1="{y:.2f}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 6}" y="{y + 4:.2f}" text-anchor="end">{t:.3g}</text>')
    for t in _ticks(h.min(), h.max(), min(len(h) - 1, 5) or 1):
        x = float(sx(t))
        parts.append(f'<line x1="{x:.2f}" x2="{x:.2f}" y1="{y0}" y2="{y0 + 4}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{y0 + 16}" text-anchor="middle">{t:g}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 6}" text-anchor="middle">horizon (quarters)</text>')
    if title:
        parts.append(f'<text x="{(x0 + x1) / 2}" y="18" text-anchor="middle" '
                     f'font-size="13">{escape(title)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
