"""Static SVG figures: airfoil outlines, pairwise feature scatter, forward-process snapshots."""

from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .cst import AirfoilCoordinates

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _svg(width: float, height: float, body: list[str]) -> str:
    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
            f'viewBox="0 0 {width:.0f} {height:.0f}">',
            f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
            *body,
            "</svg>",
            "",
        ]
    )


def _outline_path(coords: AirfoilCoordinates, x0, y0, scale, colour) -> str:
    pts = " L ".join(f"{x0 + scale * x:.2f},{y0 - scale * y:.2f}" for x, y in coords.points)
    return f'<path d="M {pts} Z" fill="none" stroke="{colour}" stroke-width="1.5"/>'


def airfoils_svg(
    airfoils: Sequence[AirfoilCoordinates],
    labels: Optional[Sequence[str]] = None,
    panel_width: float = 400,
    stacked: bool = True,
) -> str:
    """One closed outline per airfoil, each with an optional text annotation."""
    if not airfoils:
        raise ValueError("nothing to plot")
    labels = list(labels or [""] * len(airfoils))
    scale = panel_width - 40
    body = []
    if stacked:
        row_h = 0.45 * scale
        for k, (c, lab) in enumerate(zip(airfoils, labels)):
            y0 = 20 + row_h * (k + 0.5)
            body.append(_outline_path(c, 20, y0, scale, PALETTE[k % len(PALETTE)]))
            if lab:
                body.append(f'<text x="20" y="{y0 - row_h * 0.35:.1f}" font-size="11">{escape(lab)}</text>')
        return _svg(panel_width, 40 + row_h * len(airfoils), body)
    y0 = 0.3 * scale + 20
    for k, (c, lab) in enumerate(zip(airfoils, labels)):
        colour = PALETTE[k % len(PALETTE)]
        body.append(_outline_path(c, 20, y0, scale, colour))
        if lab:
            body.append(f'<text x="20" y="{14 + 13 * k}" font-size="11" fill="{colour}">{escape(lab)}</text>')
    return _svg(panel_width, 0.6 * scale + 40, body)


def scatter_svg(features: np.ndarray, names: Sequence[str] = ("C_L", "C_D", "C_M"), panel: float = 260) -> str:
    """Pairwise scatter panels for every feature pair."""
    f = np.asarray(features, dtype=float)
    if f.ndim != 2 or len(f) == 0:
        raise ValueError("need a non-empty feature matrix")
    pairs = [(i, j) for i in range(f.shape[1]) for j in range(i + 1, f.shape[1])]
    body = []
    pad = 35
    for k, (i, j) in enumerate(pairs):
        ox = k * panel
        lo_x, hi_x = f[:, i].min(), f[:, i].max()
        lo_y, hi_y = f[:, j].min(), f[:, j].max()
        sx = (panel - 2 * pad) / ((hi_x - lo_x) or 1.0)
        sy = (panel - 2 * pad) / ((hi_y - lo_y) or 1.0)
        dots = "".join(
            f'<circle cx="{ox + pad + sx * (a - lo_x):.2f}" cy="{panel - pad - sy * (b - lo_y):.2f}" r="1.5"/>'
            for a, b in zip(f[:, i], f[:, j])
        )
        body.append(f'<g class="panel" fill="{PALETTE[0]}">')
        body.append(
            f'<rect x="{ox + pad}" y="{pad}" width="{panel - 2 * pad}" height="{panel - 2 * pad}" '
            f'fill="none" stroke="black"/>'
        )
        body.append(dots)
        body.append(f'<text x="{ox + panel / 2:.0f}" y="{panel - 8}" font-size="12" fill="black">{names[i]}</text>')
        body.append(
            f'<text x="{ox + 4}" y="{panel / 2:.0f}" font-size="12" fill="black">{names[j]}</text>'
        )
        body.append("</g>")
    return _svg(panel * len(pairs), panel, body)


def forward_process_svg(snapshots: Sequence[AirfoilCoordinates], steps: Sequence[int], panel: float = 240) -> str:
    """Side-by-side geometry snapshots at selected diffusion steps."""
    body = []
    scale = panel - 30
    for k, (c, t) in enumerate(zip(snapshots, steps)):
        ox = k * panel + 15
        body.append(f'<g class="snapshot" data-step="{t}">')
        body.append(_outline_path(c, ox, panel / 2, scale, PALETTE[0]))
        body.append(f'<text x="{ox}" y="18" font-size="12">t = {t}</text>')
        body.append("</g>")
    return _svg(panel * len(snapshots), panel, body)
