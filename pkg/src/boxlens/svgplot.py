"""Minimal standalone SVG emitters: lines, bars, heatmaps.

Pure string generation with fixed-precision coordinates, so the same data
always yields the same bytes. Just enough to eyeball curves and surfaces;
no styling knobs, no dependencies.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

WIDTH, HEIGHT = 640, 420
MARGIN = 52
PALETTE = ("#1f6feb", "#d1242f", "#1a7f37", "#9a6700", "#8250df",
           "#bf3989", "#57606a", "#0969da")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
    ]


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def _scale(values: np.ndarray, lo_px: float, hi_px: float) -> tuple[float, float, float]:
    vmin, vmax = float(np.min(values)), float(np.max(values))
    if vmax == vmin:
        vmin, vmax = vmin - 0.5, vmax + 0.5
    k = (hi_px - lo_px) / (vmax - vmin)
    return vmin, vmax, k


def _axes(xmin, xmax, ymin, ymax) -> list[str]:
    x0, x1 = MARGIN, WIDTH - MARGIN
    y0, y1 = HEIGHT - MARGIN, MARGIN
    return [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{x0}" y="{y0 + 16}" text-anchor="middle">{xmin:.3g}</text>',
        f'<text x="{x1}" y="{y0 + 16}" text-anchor="middle">{xmax:.3g}</text>',
        f'<text x="{x0 - 6}" y="{y0}" text-anchor="end">{ymin:.3g}</text>',
        f'<text x="{x0 - 6}" y="{y1 + 4}" text-anchor="end">{ymax:.3g}</text>',
    ]


def line_plot(series: list[tuple[str, np.ndarray, np.ndarray]], title: str = "",
              rug: tuple[float, ...] = ()) -> str:
    """One polyline per (label, xs, ys); optional rug tick marks on the axis."""
    if not series:
        raise ConfigError("line_plot needs at least one series")
    all_x = np.concatenate([np.asarray(xs, dtype=float) for _, xs, _ in series])
    all_y = np.concatenate([np.asarray(ys, dtype=float) for _, _, ys in series])
    xmin, xmax, kx = _scale(all_x, MARGIN, WIDTH - MARGIN)
    ymin, ymax, ky = _scale(all_y, HEIGHT - MARGIN, MARGIN)

    out = _header(title) + _axes(xmin, xmax, ymin, ymax)
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(
            f"{_fmt(MARGIN + (float(x) - xmin) * kx)},"
            f"{_fmt(HEIGHT - MARGIN + (float(y) - ymin) * ky)}"
            for x, y in zip(xs, ys)
        )
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if label and len(series) <= 8:
            out.append(
                f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 14 * i + 10}" '
                f'fill="{color}" font-size="10">{_esc(label)}</text>'
            )
    for mark in rug:
        px = MARGIN + (float(mark) - xmin) * kx
        out.append(
            f'<line x1="{_fmt(px)}" y1="{HEIGHT - MARGIN}" x2="{_fmt(px)}" '
            f'y2="{HEIGHT - MARGIN - 8}" stroke="#57606a"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(labels: list[str], values, title: str = "") -> str:
    """Horizontal bars, one per label, signed values allowed."""
    if not labels:
        raise ConfigError("bar_chart needs at least one bar")
    vals = np.asarray(values, dtype=float)
    lo = min(0.0, float(vals.min()))
    hi = max(0.0, float(vals.max()))
    if hi == lo:
        hi = lo + 1.0
    kx = (WIDTH - 2 * MARGIN) / (hi - lo)
    zero_px = MARGIN + (0.0 - lo) * kx
    slot = (HEIGHT - 2 * MARGIN) / len(labels)
    bar_h = max(4.0, min(24.0, slot * 0.7))

    out = _header(title)
    out.append(f'<line x1="{_fmt(zero_px)}" y1="{MARGIN}" x2="{_fmt(zero_px)}" '
               f'y2="{HEIGHT - MARGIN}" stroke="black"/>')
    for i, (label, v) in enumerate(zip(labels, vals)):
        y = MARGIN + i * slot + (slot - bar_h) / 2
        x = zero_px if v >= 0 else zero_px + v * kx
        w = abs(v) * kx
        color = PALETTE[0] if v >= 0 else PALETTE[1]
        out.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
                   f'height="{_fmt(bar_h)}" fill="{color}"/>')
        out.append(f'<text x="{MARGIN - 6}" y="{_fmt(y + bar_h / 2 + 4)}" '
                   f'text-anchor="end" font-size="10">{_esc(label)}</text>')
        out.append(f'<text x="{_fmt(zero_px + (v * kx) + (4 if v >= 0 else -4))}" '
                   f'y="{_fmt(y + bar_h / 2 + 4)}" '
                   f'text-anchor="{"start" if v >= 0 else "end"}" '
                   f'font-size="10">{v:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(matrix, x_edges, y_edges, title: str = "") -> str:
    """Cell grid colored blue (low) to red (high), zero at white."""
    m = np.asarray(matrix, dtype=float)
    xs = np.asarray(x_edges, dtype=float)
    ys = np.asarray(y_edges, dtype=float)
    if m.shape != (len(ys), len(xs)):
        raise ConfigError(f"matrix shape {m.shape} does not match edges "
                          f"({len(ys)}, {len(xs)})")
    xmin, xmax, kx = _scale(xs, MARGIN, WIDTH - MARGIN)
    ymin, ymax, ky = _scale(ys, HEIGHT - MARGIN, MARGIN)
    span = float(np.max(np.abs(m))) or 1.0

    out = _header(title) + _axes(xmin, xmax, ymin, ymax)
    for j in range(len(ys) - 1):
        for i in range(len(xs) - 1):
            v = (m[j, i] + m[j, i + 1] + m[j + 1, i] + m[j + 1, i + 1]) / 4.0
            t = max(-1.0, min(1.0, v / span))
            if t >= 0:
                color = f"rgb({255 - int(120 * t)},{255 - int(200 * t)},255)"
            else:
                color = f"rgb(255,{255 + int(200 * t)},{255 + int(120 * t)})"
            x0 = MARGIN + (xs[i] - xmin) * kx
            x1 = MARGIN + (xs[i + 1] - xmin) * kx
            y0 = HEIGHT - MARGIN + (ys[j] - ymin) * ky
            y1 = HEIGHT - MARGIN + (ys[j + 1] - ymin) * ky
            out.append(
                f'<rect x="{_fmt(x0)}" y="{_fmt(min(y0, y1))}" '
                f'width="{_fmt(abs(x1 - x0))}" height="{_fmt(abs(y0 - y1))}" '
                f'fill="{color}"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(svg: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
