"""SVG rendering of 1-D and 2-D pavings.

Output bytes depend only on the paving, so rendered files can be compared
directly in tests.
"""

from __future__ import annotations

import numpy as np

from .expr import eval_array, parse_model
from .interval import Paving

FILLS = {"accepted": "#2ca02c", "rejected": "#d62728", "boundary": "#ffdd00"}
STROKE = "#333333"


def _f(v: float) -> str:
    return f"{v:.3f}"


def _header(width: int, height: int) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def _legend(x: float, y: float) -> list[str]:
    out = []
    for i, (name, fill) in enumerate(FILLS.items()):
        ox = x + i * 110
        out.append(f'<rect x="{_f(ox)}" y="{_f(y)}" width="12" height="12" fill="{fill}" stroke="{STROKE}"/>')
        out.append(f'<text x="{_f(ox + 16)}" y="{_f(y + 11)}" font-family="sans-serif" font-size="12">{name}</text>')
    return out


def render_1d(paving: Paving, width: int = 800, height: int = 360, samples: int = 1001) -> str:
    """Coloured segments along the adjustment axis with the model curve above them."""
    (r0, r1), = paving.R
    (p0, p1), = paving.P
    margin = 40
    plot_w = width - 2 * margin
    strip_y, strip_h = height - 70, 20
    top, bottom = margin, strip_y - 20

    def sx(v):
        return margin + (v - r0) / (r1 - r0) * plot_w

    out = _header(width, height)
    for name, box in paving:
        (lo, hi), = box
        out.append(
            f'<rect x="{_f(sx(lo))}" y="{strip_y}" width="{_f(sx(hi) - sx(lo))}" height="{strip_h}" '
            f'fill="{FILLS[name]}"/>'
        )
    out.append(f'<rect x="{margin}" y="{strip_y}" width="{plot_w}" height="{strip_h}" fill="none" stroke="{STROKE}"/>')

    xs = np.linspace(r0, r1, samples)
    ys = None
    if paving.model:
        model = parse_model(paving.model, 1)
        if model.outputs == 1:
            ys = eval_array(model.components[0], xs)
    lo_y, hi_y = p0, p1
    if ys is not None and np.isfinite(ys).any():
        lo_y = min(lo_y, float(np.nanmin(ys)))
        hi_y = max(hi_y, float(np.nanmax(ys)))
    span = (hi_y - lo_y) or 1.0

    def sy(v):
        return bottom - (v - lo_y) / span * (bottom - top)

    out.append(
        f'<rect x="{margin}" y="{_f(sy(p1))}" width="{plot_w}" height="{_f(sy(p0) - sy(p1))}" '
        f'fill="{FILLS["accepted"]}" fill-opacity="0.15"/>'
    )
    for level in (p0, p1):
        out.append(
            f'<line x1="{margin}" y1="{_f(sy(level))}" x2="{margin + plot_w}" y2="{_f(sy(level))}" '
            f'stroke="{STROKE}" stroke-dasharray="4 3"/>'
        )
    if ys is not None:
        runs, cur = [], []
        for xv, yv in zip(xs, ys):
            if np.isfinite(yv):
                cur.append(f"{_f(sx(xv))},{_f(sy(yv))}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for pts in runs:
            out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    out.append(f'<text x="{margin}" y="{height - 30}" font-family="sans-serif" font-size="12">{r0:g}</text>')
    out.append(
        f'<text x="{margin + plot_w}" y="{height - 30}" font-family="sans-serif" font-size="12" '
        f'text-anchor="end">{r1:g}</text>'
    )
    out += _legend(margin, height - 20)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_2d(paving: Paving, size: int = 600) -> str:
    """Rectangle map of the paving; the second axis points up."""
    (x0, x1), (y0, y1) = paving.R
    margin = 30
    plot = size - 2 * margin
    height = size + 30
    sx_ = plot / (x1 - x0)
    sy_ = plot / (y1 - y0)
    out = _header(size, height)
    for name, box in paving:
        (a, b), (c, d) = box
        out.append(
            f'<rect x="{_f(margin + (a - x0) * sx_)}" y="{_f(margin + (y1 - d) * sy_)}" '
            f'width="{_f((b - a) * sx_)}" height="{_f((d - c) * sy_)}" fill="{FILLS[name]}" '
            f'stroke="{STROKE}" stroke-width="0.2"/>'
        )
    out.append(f'<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" fill="none" stroke="{STROKE}"/>')
    out += _legend(margin, size + 5)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render(paving: Paving) -> str:
    if paving.R.dim == 1:
        return render_1d(paving)
    if paving.R.dim == 2:
        return render_2d(paving)
    raise ValueError(f"cannot plot a {paving.R.dim}-dimensional paving")
