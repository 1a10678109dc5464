"""Minimal log-log SVG line plots with a fitted-slope annotation."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .stats import fit_rate


def loglog_svg(x: Sequence[float], series: dict[str, Sequence[float]], title: str = "",
               xlabel: str = "N", ylabel: str = "error", width: int = 560, height: int = 400) -> str:
    """Render one or more positive series against ``x`` on log-log axes.

    The first series gets a least-squares slope annotation.
    """
    x = np.asarray(x, dtype=float)
    cols = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    ml, mr, mt, mb = 70, 20, 40, 50
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    pos = np.concatenate([y[y > 0] for y in ys]) if ys else np.array([1.0])
    lx0, lx1 = np.log10(x.min()), np.log10(x.max())
    ly0, ly1 = np.log10(pos.min()), np.log10(pos.max())
    if lx1 == lx0:
        lx1 += 1
    if ly1 == ly0:
        ly1 += 1
    pad = 0.05 * (ly1 - ly0)
    ly0, ly1 = ly0 - pad, ly1 + pad

    def px(v):
        return ml + (np.log10(v) - lx0) / (lx1 - lx0) * (width - ml - mr)

    def py(v):
        return height - mb - (np.log10(v) - ly0) / (ly1 - ly0) * (height - mt - mb)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>']
    for xv in x:
        out.append(f'<text x="{px(xv):.1f}" y="{height - mb + 16}" text-anchor="middle">{xv:g}</text>')
    for e in range(int(np.floor(ly0)), int(np.ceil(ly1)) + 1):
        if ly0 <= e <= ly1:
            out.append(f'<text x="{ml - 6}" y="{py(10.0 ** e) + 4:.1f}" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{height / 2:.1f}" transform="rotate(-90 16 {height / 2:.1f})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for k, (name, y) in enumerate(series.items()):
        y = np.asarray(y, dtype=float)
        ok = y > 0
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[ok], y[ok]))
        c = cols[k % len(cols)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        for a, b in zip(x[ok], y[ok]):
            out.append(f'<circle cx="{px(a):.1f}" cy="{py(b):.1f}" r="3" fill="{c}"/>')
        label = escape(name)
        if k == 0 and ok.sum() >= 3:
            label += f" (slope {fit_rate(x[ok], y[ok]).slope:.3f})"
        out.append(f'<text x="{width - mr - 4}" y="{mt + 14 * (k + 1)}" text-anchor="end" fill="{c}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
