"""Deterministic report emission: CSV, JSON and hand-drawn SVG line plots.

Floats are serialized with repr (shortest round trip), so identical inputs
always produce identical bytes.
"""

import json


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def write_json(path, obj):
    with open(path, "w") as f:
        f.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_WIDTH, _HEIGHT = 480, 320
_ML, _MR, _MT, _MB = 54, 16, 28, 46


def svg_line_plot(path, x_labels, series, title="", y_range=(0.0, 1.0),
                  x_title="", y_title=""):
    """One polyline per named series over shared categorical x positions."""
    n = len(x_labels)
    lo, hi = y_range
    span = hi - lo if hi > lo else 1.0
    plot_w = _WIDTH - _ML - _MR
    plot_h = _HEIGHT - _MT - _MB

    def sx(i):
        return _ML + (plot_w * i / max(n - 1, 1))

    def sy(v):
        frac = (v - lo) / span
        return _MT + plot_h * (1.0 - min(max(frac, 0.0), 1.0))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="18" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif">{title}</text>',
        f'<line x1="{_ML}" y1="{_MT + plot_h}" x2="{_ML + plot_w}" '
        f'y2="{_MT + plot_h}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + plot_h}" stroke="black"/>',
    ]
    for t in range(5):
        v = lo + span * t / 4.0
        y = sy(v)
        parts.append(f'<line x1="{_ML - 4}" y1="{y:.2f}" x2="{_ML}" y2="{y:.2f}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{_ML - 7}" y="{y + 4:.2f}" text-anchor="end" '
                     f'font-size="10" font-family="sans-serif">{v:.3g}</text>')
    for i, label in enumerate(x_labels):
        x = sx(i)
        parts.append(f'<line x1="{x:.2f}" y1="{_MT + plot_h}" x2="{x:.2f}" '
                     f'y2="{_MT + plot_h + 4}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{_MT + plot_h + 16}" text-anchor="middle" '
                     f'font-size="10" font-family="sans-serif">{label}</text>')
    if x_title:
        parts.append(f'<text x="{_ML + plot_w / 2:.1f}" y="{_HEIGHT - 8}" '
                     'text-anchor="middle" font-size="11" '
                     f'font-family="sans-serif">{x_title}</text>')
    if y_title:
        parts.append(f'<text x="14" y="{_MT + plot_h / 2:.1f}" text-anchor="middle" '
                     f'font-size="11" font-family="sans-serif" '
                     f'transform="rotate(-90 14 {_MT + plot_h / 2:.1f})">{y_title}</text>')
    for k, (name, ys) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        points = " ".join(f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(ys))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{points}"/>')
        ly = _MT + 12 + 13 * k
        parts.append(f'<line x1="{_ML + plot_w - 70}" y1="{ly - 4}" '
                     f'x2="{_ML + plot_w - 52}" y2="{ly - 4}" stroke="{color}" '
                     'stroke-width="1.5"/>')
        parts.append(f'<text x="{_ML + plot_w - 48}" y="{ly}" font-size="10" '
                     f'font-family="sans-serif">{name}</text>')
    parts.append("</svg>")
    with open(path, "w", newline="") as f:
        f.write("\n".join(parts) + "\n")
