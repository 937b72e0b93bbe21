"""Dependency-free SVG charts: boxplots, stem plots, heat maps, overlays
and labelled scatters."""


def _svg(width, height, body, title=None):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    parts.append(body)
    parts.append("</svg>")
    return "\n".join(parts)


def _scale(vmin, vmax, lo, hi):
    span = (vmax - vmin) or 1.0

    def f(v):
        return lo + (v - vmin) / span * (hi - lo)

    return f


def boxplot_svg(groups, path, title=None):
    """groups: ordered (label, stats) with min/q1/median/mean/q3/max."""
    width, height = max(400, 60 * len(groups) + 80), 360
    vmin = min(s["min"] for _, s in groups)
    vmax = max(s["max"] for _, s in groups)
    y = _scale(vmin, vmax, height - 50, 40)
    body = []
    for i, (label, s) in enumerate(groups):
        cx = 60 + i * 60
        body.append(
            f'<line x1="{cx}" y1="{y(s["min"]):.1f}" x2="{cx}" '
            f'y2="{y(s["max"]):.1f}" stroke="black"/>'
        )
        top, bottom = y(s["q3"]), y(s["q1"])
        body.append(
            f'<rect x="{cx - 15}" y="{top:.1f}" width="30" '
            f'height="{bottom - top:.1f}" fill="#9ecae1" stroke="black"/>'
        )
        body.append(
            f'<line x1="{cx - 15}" y1="{y(s["median"]):.1f}" x2="{cx + 15}" '
            f'y2="{y(s["median"]):.1f}" stroke="black" stroke-width="2"/>'
        )
        body.append(
            f'<line x1="{cx - 15}" y1="{y(s["mean"]):.1f}" x2="{cx + 15}" '
            f'y2="{y(s["mean"]):.1f}" stroke="green" stroke-dasharray="4 2"/>'
        )
        body.append(
            f'<text x="{cx}" y="{height - 30}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{label}</text>'
        )
    with open(path, "w") as fh:
        fh.write(_svg(width, height, "\n".join(body), title))


def stem_svg(values, path, title=None, threshold=None):
    """Stem plot for (P)ACF-style sequences indexed from lag 1."""
    width, height = max(420, 4 * len(values) + 80), 300
    vmax = max(1e-9, max(abs(float(v)) for v in values))
    y = _scale(-vmax, vmax, height - 40, 40)
    x = _scale(0, len(values) + 1, 50, width - 20)
    zero = y(0)
    body = [f'<line x1="50" y1="{zero:.1f}" x2="{width - 20}" y2="{zero:.1f}" stroke="black"/>']
    if threshold is not None:
        for sign in (1, -1):
            body.append(
                f'<line x1="50" y1="{y(sign * threshold):.1f}" x2="{width - 20}" '
                f'y2="{y(sign * threshold):.1f}" stroke="red" stroke-dasharray="4 3"/>'
            )
    for i, v in enumerate(values, start=1):
        body.append(
            f'<line x1="{x(i):.1f}" y1="{zero:.1f}" x2="{x(i):.1f}" '
            f'y2="{y(float(v)):.1f}" stroke="#3182bd"/>'
        )
    with open(path, "w") as fh:
        fh.write(_svg(width, height, "\n".join(body), title))


def heatmap_svg(matrix, labels, path, title=None):
    """Dark cells for low values; rows/columns ordered as given."""
    k = len(labels)
    cell = 42
    width, height = 120 + cell * k, 80 + cell * k
    body = []
    for i in range(k):
        for j in range(k):
            v = min(max(float(matrix[i][j]), 0.0), 1.0)
            shade = int(round(v * 255))
            body.append(
                f'<rect x="{100 + j * cell}" y="{50 + i * cell}" width="{cell}" '
                f'height="{cell}" fill="rgb({shade},{shade},{shade})" stroke="#888"/>'
            )
    for i, label in enumerate(labels):
        body.append(
            f'<text x="95" y="{50 + i * cell + cell / 2 + 4}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{label}</text>'
        )
        body.append(
            f'<text x="{100 + i * cell + cell / 2}" y="{46 + cell * k + 14}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">{label}</text>'
        )
    with open(path, "w") as fh:
        fh.write(_svg(width, height, "\n".join(body), title))


def overlay_svg(series_list, path, title=None):
    """Line overlay of (label, values) sequences sharing one x axis."""
    width, height = 760, 320
    n = max(len(v) for _, v in series_list)
    flat = [float(v) for _, vals in series_list for v in vals]
    y = _scale(min(flat), max(flat), height - 40, 40)
    x = _scale(0, max(n - 1, 1), 50, width - 20)
    colors = ("#3182bd", "#e6550d", "#31a354", "#756bb1")
    body = []
    for c, (label, vals) in enumerate(series_list):
        pts = " ".join(f"{x(i):.1f},{y(float(v)):.1f}" for i, v in enumerate(vals))
        body.append(
            f'<polyline points="{pts}" fill="none" stroke="{colors[c % len(colors)]}"/>'
        )
        body.append(
            f'<text x="{width - 140}" y="{40 + 16 * c}" font-family="sans-serif" '
            f'font-size="11" fill="{colors[c % len(colors)]}">{label}</text>'
        )
    with open(path, "w") as fh:
        fh.write(_svg(width, height, "\n".join(body), title))


def scatter_svg(points, labels, path, title=None):
    """Labelled 2-D scatter (e.g. PCA projection of embedding rows)."""
    width, height = 560, 480
    xs = [float(p[0]) for p in points]
    ys = [float(p[1]) for p in points]
    x = _scale(min(xs), max(xs), 60, width - 40)
    y = _scale(min(ys), max(ys), height - 50, 50)
    body = []
    for (px, py), label in zip(points, labels):
        body.append(f'<circle cx="{x(px):.1f}" cy="{y(py):.1f}" r="4" fill="#3182bd"/>')
        body.append(
            f'<text x="{x(px) + 6:.1f}" y="{y(py) - 6:.1f}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    with open(path, "w") as fh:
        fh.write(_svg(width, height, "\n".join(body), title))
