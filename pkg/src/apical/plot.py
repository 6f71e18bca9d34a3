"""Render a metrics CSV (epoch,split,loss,accuracy) as a standalone SVG line chart."""

from __future__ import annotations

import csv
from collections import defaultdict
from xml.sax.saxutils import escape

from .errors import FormatError

HEADER = ["epoch", "split", "loss", "accuracy"]
COLORS = {"train": "#1f77b4", "val": "#ff7f0e", "test": "#2ca02c"}
PANEL_W, PANEL_H, MARGIN = 420, 260, 50


def read_metrics(path) -> dict:
    """split -> list of (epoch, loss, accuracy), in file order."""
    series = defaultdict(list)
    with open(path, newline="") as f:
        rows = csv.reader(f)
        header = next(rows, None)
        if header is None:
            raise FormatError("metrics file is empty", 1)
        if [h.strip() for h in header] != HEADER:
            raise FormatError(f"expected header {','.join(HEADER)}", 1)
        for lineno, row in enumerate(rows, 2):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"expected 4 fields, got {len(row)}", lineno)
            try:
                epoch, loss, acc = int(row[0]), float(row[2]), float(row[3])
            except ValueError as exc:
                raise FormatError(f"bad number: {exc}", lineno) from None
            series[row[1].strip()].append((epoch, loss, acc))
    if not series:
        raise FormatError("metrics file has no data rows", 2)
    return dict(series)


def _range(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    return lo, hi


def _panel(title, series, column, x0):
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[column] for pts in series.values() for p in pts]
    xmin, xmax = _range(xs)
    ymin, ymax = _range(ys)
    w, h = PANEL_W - 2 * MARGIN, PANEL_H - 2 * MARGIN

    def sx(v):
        return x0 + MARGIN + (v - xmin) / (xmax - xmin) * w

    def sy(v):
        return MARGIN + h - (v - ymin) / (ymax - ymin) * h

    out = [
        f'<g class="panel" data-metric="{title}" data-xmin="{xmin!r}" data-xmax="{xmax!r}" '
        f'data-ymin="{ymin!r}" data-ymax="{ymax!r}">',
        f'<rect x="{x0 + MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="#888"/>',
        f'<text x="{x0 + PANEL_W / 2}" y="{MARGIN - 15}" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{x0 + MARGIN}" y="{MARGIN + h + 18}" font-size="11">{xmin:g}</text>',
        f'<text x="{x0 + MARGIN + w}" y="{MARGIN + h + 18}" font-size="11" text-anchor="end">{xmax:g}</text>',
        f'<text x="{x0 + MARGIN - 5}" y="{MARGIN + h}" font-size="11" text-anchor="end">{ymin:.4g}</text>',
        f'<text x="{x0 + MARGIN - 5}" y="{MARGIN + 10}" font-size="11" text-anchor="end">{ymax:.4g}</text>',
    ]
    for split, pts in series.items():
        coords = " ".join(f"{sx(p[0]):.2f},{sy(p[column]):.2f}" for p in pts)
        color = COLORS.get(split, "#555")
        out.append(
            f'<polyline data-series="{escape(split)}" fill="none" stroke="{color}" '
            f'stroke-width="1.5" points="{coords}"/>'
        )
    out.append("</g>")
    return out


def metrics_to_svg(series: dict) -> str:
    width = 2 * PANEL_W
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H + 30}" '
        f'viewBox="0 0 {width} {PANEL_H + 30}" font-family="sans-serif">'
    ]
    parts += _panel("loss", series, 1, 0)
    parts += _panel("accuracy", series, 2, PANEL_W)
    for i, split in enumerate(series):
        parts.append(
            f'<text x="{MARGIN + 80 * i}" y="{PANEL_H + 15}" fill="{COLORS.get(split, "#555")}" '
            f'font-size="12">{escape(split)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot_metrics(csv_path, svg_path) -> None:
    svg = metrics_to_svg(read_metrics(csv_path))
    with open(svg_path, "w") as f:
        f.write(svg)
