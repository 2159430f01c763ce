"""Minimal SVG output: eigenvalue scatter plots and polar heat maps of |q(z)|."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

SIZE = 600
MARGIN = 40


def _fmt(x):
    return f"{x:.3f}"


class _Canvas:
    def __init__(self, extent, title):
        self.extent = extent
        self.scale = (SIZE - 2 * MARGIN) / (2 * extent)
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
            f'viewBox="0 0 {SIZE} {SIZE}">',
            f"<title>{escape(title)}</title>",
            f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
        ]

    def xy(self, z):
        return SIZE / 2 + z.real * self.scale, SIZE / 2 - z.imag * self.scale

    def axes(self):
        c = SIZE / 2
        self.parts.append(
            f'<line x1="{MARGIN}" y1="{c}" x2="{SIZE - MARGIN}" y2="{c}" stroke="#bbb" stroke-width="0.5"/>'
        )
        self.parts.append(
            f'<line x1="{c}" y1="{MARGIN}" x2="{c}" y2="{SIZE - MARGIN}" stroke="#bbb" stroke-width="0.5"/>'
        )
        self.parts.append(
            f'<text x="{SIZE - MARGIN}" y="{c - 4}" font-size="10" text-anchor="end">{self.extent:.3g}</text>'
        )

    def circle(self, radius, color="#d33", dash="4,3"):
        self.parts.append(
            f'<circle cx="{SIZE / 2}" cy="{SIZE / 2}" r="{_fmt(radius * self.scale)}" fill="none" '
            f'stroke="{color}" stroke-width="1" stroke-dasharray="{dash}"/>'
        )

    def dot(self, z, color="#225", r=1.5):
        x, y = self.xy(z)
        self.parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" fill="{color}"/>')

    def cross(self, z, color="#d33", h=5):
        x, y = self.xy(z)
        self.parts.append(
            f'<path d="M{_fmt(x - h)},{_fmt(y - h)}L{_fmt(x + h)},{_fmt(y + h)}'
            f'M{_fmt(x - h)},{_fmt(y + h)}L{_fmt(x + h)},{_fmt(y - h)}" stroke="{color}" stroke-width="1.5"/>'
        )

    def sector(self, r0, r1, t0, t1, color):
        pts = []
        for r, t in ((r0, t0), (r1, t0), (r1, t1), (r0, t1)):
            pts.append(self.xy(r * complex(math.cos(t), math.sin(t))))
        d = "M" + "L".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts) + "Z"
        self.parts.append(f'<path d="{d}" fill="{color}" stroke="none"/>')

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def spectrum_svg(eigs, bulk_radius, predicted=(), title="spectrum"):
    """Eigenvalues as dots, theoretical bulk circle dashed, predicted outliers as crosses."""
    eigs = np.asarray(eigs, dtype=complex)
    points = [abs(z) for z in eigs] + [abs(complex(p)) for p in predicted] + [bulk_radius]
    extent = 1.1 * max(points)
    canvas = _Canvas(extent, title)
    canvas.axes()
    canvas.circle(bulk_radius)
    for z in eigs:
        canvas.dot(complex(z))
    for p in predicted:
        canvas.cross(complex(p))
    return canvas.render()


def _viridis_like(t):
    """Cheap blue-to-yellow ramp for t in [0, 1]."""
    t = min(max(t, 0.0), 1.0)
    r = int(round(68 + t * (253 - 68)))
    g = int(round(1 + t * (231 - 1)))
    b = int(round(84 + t * (37 - 84)))
    return f"#{r:02x}{g:02x}{b:02x}"


def polar_modulus_svg(func, radius, zeros=(), n_r=24, n_theta=72, title="|q(z)|"):
    """log|func| on a polar grid of the disk |z| <= radius, with zeros marked."""
    radii = np.linspace(0, radius, n_r + 1)
    thetas = np.linspace(0, 2 * np.pi, n_theta + 1)
    values = np.empty((n_r, n_theta))
    for i in range(n_r):
        rm = 0.5 * (radii[i] + radii[i + 1])
        for j in range(n_theta):
            tm = 0.5 * (thetas[j] + thetas[j + 1])
            v = abs(func(rm * complex(math.cos(tm), math.sin(tm))))
            values[i, j] = math.log(v) if v > 0 else -np.inf
    finite = values[np.isfinite(values)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    canvas = _Canvas(1.1 * radius, title)
    for i in range(n_r):
        for j in range(n_theta):
            t = (values[i, j] - lo) / span if np.isfinite(values[i, j]) else 0.0
            canvas.sector(radii[i], radii[i + 1], thetas[j], thetas[j + 1], _viridis_like(t))
    canvas.axes()
    canvas.circle(radius, color="#000", dash="2,2")
    for z in zeros:
        canvas.cross(complex(z), color="#f0f")
    return canvas.render()
