"""Minimal SVG scatter plots and bar charts."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]
WIDTH, HEIGHT, MARGIN = 480, 400, 50


def _header(title: str, meta: dict[str, str]) -> list[str]:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
    ]
    if meta:
        lines.append("<metadata>" + escape(" ".join(f"{k}={v}" for k, v in sorted(meta.items()))) + "</metadata>")
    lines.append(f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    return lines


def _scale(v: np.ndarray, lo_px: float, hi_px: float, magnitude: float = 0.0) -> np.ndarray:
    lo, hi = float(np.min(v)), float(np.max(v))
    # spans at rounding-noise level relative to the whole plot are drawn as a flat line
    if not hi - lo > 1e-9 * magnitude or not hi > lo:
        return np.full(v.shape, (lo_px + hi_px) / 2)
    return lo_px + (v - lo) / (hi - lo) * (hi_px - lo_px)


def scatter(
    coords: np.ndarray,
    labels: Sequence[int],
    class_names: Sequence[str],
    title: str = "",
    axis_labels: tuple[str, str] = ("dim 1", "dim 2"),
    meta: dict[str, str] | None = None,
) -> str:
    """One ``<circle class="point">`` per row, coloured by class."""
    P = np.asarray(coords, dtype=float)
    with np.errstate(all="ignore"):
        P = np.where(np.isfinite(P), P, 0.0)
    mag = float(np.max(np.abs(P))) if P.size else 0.0
    xs = _scale(P[:, 0], MARGIN, WIDTH - MARGIN, mag)
    ys = _scale(P[:, 1], HEIGHT - MARGIN, MARGIN, mag) if P.shape[1] > 1 else np.full(len(P), HEIGHT / 2)
    lines = _header(title, meta or {})
    lines.append(
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
        'fill="none" stroke="#888"/>'
    )
    lines.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(axis_labels[0])}</text>')
    lines.append(
        f'<text x="14" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT / 2:.1f})">{escape(axis_labels[1])}</text>'
    )
    for x, y, c in zip(xs, ys, labels):
        color = PALETTE[int(c) % len(PALETTE)]
        lines.append(f'<circle class="point" cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}" fill-opacity="0.7"/>')
    for i, name in enumerate(class_names):
        y = MARGIN + 14 * i + 8
        lines.append(f'<rect x="{WIDTH - MARGIN + 4}" y="{y - 7}" width="8" height="8" fill="{PALETTE[i % len(PALETTE)]}"/>')
        lines.append(f'<text x="{WIDTH - MARGIN + 14}" y="{y}" font-size="10">{escape(str(name))}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def bar_chart(values: Sequence[float], names: Sequence[str], title: str = "", meta: dict[str, str] | None = None) -> str:
    """One ``<rect class="bar">`` per value."""
    vals = np.asarray(values, dtype=float)
    top = float(vals.max()) if vals.size and vals.max() > 0 else 1.0
    n = max(len(vals), 1)
    slot = (WIDTH - 2 * MARGIN) / n
    lines = _header(title, meta or {})
    for i, (v, name) in enumerate(zip(vals, names)):
        h = (HEIGHT - 2 * MARGIN) * v / top
        x = MARGIN + i * slot + slot * 0.1
        lines.append(
            f'<rect class="bar" x="{x:.2f}" y="{HEIGHT - MARGIN - h:.2f}" width="{slot * 0.8:.2f}" '
            f'height="{h:.2f}" fill="{PALETTE[0]}"/>'
        )
        cx = x + slot * 0.4
        lines.append(
            f'<text x="{cx:.2f}" y="{HEIGHT - MARGIN + 12}" font-size="9" text-anchor="end" '
            f'transform="rotate(-45 {cx:.2f} {HEIGHT - MARGIN + 12})">{escape(name)}</text>'
        )
        lines.append(f'<text x="{cx:.2f}" y="{HEIGHT - MARGIN - h - 3:.2f}" font-size="9" text-anchor="middle">{v:g}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
