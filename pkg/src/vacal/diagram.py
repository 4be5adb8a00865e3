"""Hand-rolled SVG reliability diagrams (no rendering dependencies)."""

from __future__ import annotations

import math

from .metrics import ReliabilityBins

CANVAS = 600
MARGIN = 60
PLOT = CANVAS - 2 * MARGIN
MAX_RADIUS = 30.0


def data_to_svg(x: float, y: float) -> tuple[float, float]:
    """Map data-space (x, y) in [0,1]^2 to SVG coordinates (y axis flipped)."""
    return MARGIN + x * PLOT, MARGIN + (1.0 - y) * PLOT


def write_reliability_svg(bins: ReliabilityBins, path) -> None:
    """Reliability diagram: mean predicted probability (x) against observed
    positive fraction (y) per bin, circle area proportional to the bin's
    share of the data, with the diagonal as the perfect-calibration
    reference. Fixed 600x600 canvas, ticks every 0.1.
    """
    total = bins.total
    if total == 0:
        raise ValueError("cannot draw a reliability diagram from empty bins")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" '
        f'viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="white"/>',
    ]
    x0, y0 = data_to_svg(0.0, 0.0)
    x1, y1 = data_to_svg(1.0, 1.0)
    for i in range(11):
        t = i / 10.0
        tx, _ = data_to_svg(t, 0.0)
        _, ty = data_to_svg(0.0, t)
        parts.append(
            f'<line x1="{tx:g}" y1="{y0:g}" x2="{tx:g}" y2="{y0 + 6:g}" stroke="black"/>'
        )
        parts.append(
            f'<line x1="{x0:g}" y1="{ty:g}" x2="{x0 - 6:g}" y2="{ty:g}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{tx:g}" y="{y0 + 22:g}" font-size="12" text-anchor="middle">{t:.1f}</text>'
        )
        parts.append(
            f'<text x="{x0 - 10:g}" y="{ty + 4:g}" font-size="12" text-anchor="end">{t:.1f}</text>'
        )
    parts.append(f'<line x1="{x0:g}" y1="{y0:g}" x2="{x1:g}" y2="{y0:g}" stroke="black"/>')
    parts.append(f'<line x1="{x0:g}" y1="{y0:g}" x2="{x0:g}" y2="{y1:g}" stroke="black"/>')
    parts.append(
        f'<line x1="{x0:g}" y1="{y0:g}" x2="{x1:g}" y2="{y1:g}" '
        'stroke="gray" stroke-dasharray="6,4"/>'
    )
    for m in range(bins.M):
        count = bins.counts[m]
        if not count:
            continue
        mean_pred = bins.sum_pred[m] / count
        frac_pos = bins.sum_label[m] / count
        cx, cy = data_to_svg(mean_pred, frac_pos)
        radius = MAX_RADIUS * math.sqrt(count / total)
        parts.append(
            f'<circle cx="{cx:g}" cy="{cy:g}" r="{radius:g}" '
            'fill="steelblue" fill-opacity="0.6" stroke="navy"/>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
