"""Minimal static SVG 1.1 charts: factor histograms and the noise-sweep plot."""

from __future__ import annotations

import math
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .evaluation import DoubleGaussianFit, Histogram, gaussian

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    def __init__(self, x0, x1, y0, y1):
        self.x0, self.x1 = x0, x1
        self.y0, self.y1 = y0, y1 if y1 > y0 else y0 + 1

    def px(self, x):
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)

    def py(self, y):
        return H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)


def _document(body: list[str], title: str, xlabel: str, ylabel: str, frame: _Frame) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line class="axis" x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="15" y="{H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {H / 2})">{escape(ylabel)}</text>',
        f'<text x="{LEFT}" y="{H - BOTTOM + 15}" font-size="10" text-anchor="middle">{frame.x0:.4g}</text>',
        f'<text x="{W - RIGHT}" y="{H - BOTTOM + 15}" font-size="10" text-anchor="middle">{frame.x1:.4g}</text>',
        f'<text x="{LEFT - 5}" y="{TOP + 4}" font-size="10" text-anchor="end">{frame.y1:.4g}</text>',
    ]
    return "\n".join(head + body + ["</svg>", ""])


def histogram_svg(
    h: Histogram,
    fit: Optional[DoubleGaussianFit] = None,
    dividing_point: Optional[float] = None,
    title: str = "",
    xlabel: str = "discrimination factor",
) -> str:
    """Bars for the counts, one path per fitted Gaussian, and a dividing-point line."""
    edges = np.asarray(h.bin_edges, dtype=float)
    counts = np.asarray(h.counts, dtype=float)
    frame = _Frame(edges[0], edges[-1], 0.0, counts.max() * 1.1)
    body = []
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        if c <= 0:
            continue
        x, y = frame.px(lo), frame.py(c)
        body.append(
            f'<rect class="bar" x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(frame.px(hi) - x)}" '
            f'height="{_fmt(frame.py(0) - y)}" fill="#bbbbbb" stroke="none"/>'
        )
    if fit is not None:
        xs = np.linspace(edges[0], edges[-1], 300)
        for name, amp, mu, sigma, colour in (
            ("gamma", fit.amp_g, fit.mu_g, fit.sigma_g, PALETTE[0]),
            ("neutron", fit.amp_n, fit.mu_n, fit.sigma_n, PALETTE[1]),
        ):
            ys = gaussian(xs, amp, mu, sigma)
            pts = " L ".join(f"{_fmt(frame.px(a))} {_fmt(frame.py(b))}" for a, b in zip(xs, ys))
            body.append(f'<path class="fit-curve" data-component="{name}" d="M {pts}" fill="none" stroke="{colour}" stroke-width="2"/>')
    if dividing_point is not None and np.isfinite(dividing_point):
        x = frame.px(dividing_point)
        body.append(
            f'<line class="dividing-point" x1="{_fmt(x)}" y1="{TOP}" x2="{_fmt(x)}" y2="{H - BOTTOM}" '
            'stroke="black" stroke-dasharray="4 3"/>'
        )
    return _document(body, title, xlabel, "counts", frame)


def sweep_svg(result, title: str = "Mean FOM versus noise variance") -> str:
    """One line per method; each point is annotated with its failure count."""
    variances = list(result.sweep.variances)
    means = [c.mean_fom for m in result.methods for c in result.series(m)]
    finite = [v for v in means if not math.isnan(v)]
    top = max(finite) * 1.15 if finite else 1.0
    x0, x1 = (variances[0], variances[-1]) if len(variances) > 1 else (variances[0] - 1, variances[0] + 1)
    frame = _Frame(x0, x1, 0.0, top)
    body = []
    for k, m in enumerate(result.methods):
        colour = PALETTE[k % len(PALETTE)]
        pts = []
        for c in result.series(m):
            if math.isnan(c.mean_fom):
                continue
            pts.append((frame.px(c.variance), frame.py(c.mean_fom), c))
        if pts:
            d = " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y, _ in pts)
            body.append(f'<path class="series" data-method="{escape(m)}" d="M {d}" fill="none" stroke="{colour}" stroke-width="2"/>')
        for x, y, c in pts:
            body.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{colour}"/>')
            body.append(
                f'<text class="failures" x="{_fmt(x + 4)}" y="{_fmt(y - 4)}" font-size="9" fill="{colour}">{c.failure_count}</text>'
            )
        body.append(f'<text x="{W - RIGHT - 5}" y="{TOP + 14 * (k + 1)}" font-size="11" text-anchor="end" fill="{colour}">{escape(m)}</text>')
    return _document(body, title, "noise variance", "mean FOM", frame)
