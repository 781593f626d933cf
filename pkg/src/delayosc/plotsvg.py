"""Minimal deterministic SVG line charts.

CSV files are the contract; these charts are a convenience for eyeballing
runs without extra dependencies.  Output is plain text with fixed number
formatting, so identical data gives identical files.
"""

from __future__ import annotations

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 720, 440
MARGIN = 54


def _fmt(x: float) -> str:
    return format(float(x), ".2f")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi == lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def line_chart(path, x, series, title="", x_label="", y_label="") -> None:
    """Write a polyline chart.

    ``series`` is a list of ``(label, values)`` pairs sharing the grid ``x``.
    """
    xs = list(map(float, x))
    all_y = [float(v) for _, values in series for v in values]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(all_y), max(all_y)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad
    inner_w = WIDTH - 2 * MARGIN
    inner_h = HEIGHT - 2 * MARGIN

    def px(v):
        return MARGIN + inner_w * (v - x_lo) / (x_hi - x_lo)

    def py(v):
        return HEIGHT - MARGIN - inner_h * (v - y_lo) / (y_hi - y_lo)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (WIDTH, HEIGHT, WIDTH, HEIGHT),
        '<rect width="%d" height="%d" fill="white"/>' % (WIDTH, HEIGHT),
        '<g font-family="monospace" font-size="12" fill="#222">',
    ]
    if title:
        parts.append('<text x="%d" y="20" font-size="14">%s</text>'
                     % (MARGIN, title))
    # axes
    parts.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#222"/>'
                 % (_fmt(MARGIN), _fmt(HEIGHT - MARGIN),
                    _fmt(WIDTH - MARGIN), _fmt(HEIGHT - MARGIN)))
    parts.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#222"/>'
                 % (_fmt(MARGIN), _fmt(MARGIN), _fmt(MARGIN),
                    _fmt(HEIGHT - MARGIN)))
    for tx in _ticks(x_lo, x_hi):
        parts.append('<text x="%s" y="%s" text-anchor="middle">%s</text>'
                     % (_fmt(px(tx)), _fmt(HEIGHT - MARGIN + 18),
                        format(tx, ".4g")))
    for ty in _ticks(y_lo, y_hi):
        parts.append('<text x="%s" y="%s" text-anchor="end">%s</text>'
                     % (_fmt(MARGIN - 6), _fmt(py(ty) + 4), format(ty, ".4g")))
    if x_label:
        parts.append('<text x="%s" y="%s" text-anchor="middle">%s</text>'
                     % (_fmt(WIDTH / 2), _fmt(HEIGHT - 10), x_label))
    if y_label:
        parts.append('<text x="14" y="%s" transform="rotate(-90 14 %s)" '
                     'text-anchor="middle">%s</text>'
                     % (_fmt(HEIGHT / 2), _fmt(HEIGHT / 2), y_label))
    for i, (label, values) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join("%s,%s" % (_fmt(px(xv)), _fmt(py(float(yv))))
                          for xv, yv in zip(xs, values))
        parts.append('<polyline fill="none" stroke="%s" stroke-width="1.3" '
                     'points="%s"/>' % (color, points))
        parts.append('<text x="%s" y="%s" fill="%s">%s</text>'
                     % (_fmt(WIDTH - MARGIN - 150),
                        _fmt(MARGIN + 16 + 16 * i), color, label))
    parts.append("</g></svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
