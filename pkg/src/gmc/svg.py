"""Static SVG heatmap of a correlation surface on a fixed [-1, 1] diverging scale."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .surface import CorrelationSurface

_NEG = (33, 102, 172)
_MID = (247, 247, 247)
_POS = (178, 24, 43)


def diverging_color(v: float) -> str:
    """Blue at -1, near-white at 0, red at +1."""
    v = float(np.clip(v, -1.0, 1.0))
    end = _POS if v >= 0 else _NEG
    f = abs(v)
    r, g, b = (round(m + (e - m) * f) for m, e in zip(_MID, end))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_heatmap(surface: CorrelationSurface, title: str = "", size: int = 400) -> str:
    g_s, g_d = surface.grid.shape
    left, top, bar = 60, 30, 70
    width = left + size + bar
    height = top + size + 50
    cw = size / g_s
    ch = size / g_d
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{left + size / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]
    for i in range(g_s):
        for j in range(g_d):
            x = left + i * cw
            # |dMOS| grows upward
            y = top + size - (j + 1) * ch
            out.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                f'fill="{diverging_color(surface.grid[i, j])}"/>'
            )
    out.append(f'<rect x="{left}" y="{top}" width="{size}" height="{size}" fill="none" stroke="#333"/>')

    (s0, s1), (d0, d1) = surface.qs_range, surface.qd_range
    for f in (0.0, 0.5, 1.0):
        x = left + f * size
        y = top + size - f * size
        out.append(f'<text x="{x:.1f}" y="{top + size + 14}" text-anchor="middle">{s0 + f * (s1 - s0):.1f}</text>')
        out.append(f'<text x="{left - 4}" y="{y + 4:.1f}" text-anchor="end">{d0 + f * (d1 - d0):.1f}</text>')
    out.append(f'<text x="{left + size / 2:.1f}" y="{top + size + 32}" text-anchor="middle">MOS</text>')
    out.append(
        f'<text x="14" y="{top + size / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + size / 2:.1f})">|dMOS|</text>'
    )

    bx = left + size + 20
    steps = 40
    for s in range(steps):
        v = 1.0 - 2.0 * (s + 0.5) / steps
        out.append(
            f'<rect x="{bx}" y="{top + s * size / steps:.2f}" width="14" '
            f'height="{size / steps + 0.5:.2f}" fill="{diverging_color(v)}"/>'
        )
    for v, y in ((1, top), (0, top + size / 2), (-1, top + size)):
        out.append(f'<text x="{bx + 18}" y="{y + 4:.1f}">{v:+d}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
