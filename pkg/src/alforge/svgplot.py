"""Minimal deterministic SVG charts (lines and heatmaps).

Hand-assembled markup with fixed float formatting, so identical inputs
always produce identical bytes; no plotting library in the dependency tree.
"""

PALETTE = (
    "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951",
    "#ff8ab7", "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0",
)


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def line_chart(series, title: str, x_label: str, y_label: str) -> str:
    """Render labeled (xs, ys) series as a single SVG line chart.

    series: list of (label, xs, ys) with equal-length numeric sequences.
    """
    width, height = 760, 440
    left, right, top, bottom = 70, 190, 40, 50
    plot_w, plot_h = width - left - right, height - top - bottom

    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    x_lo, x_hi = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    y_lo, y_hi = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def px(x: float) -> float:
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return top + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="20" font-size="14">{_escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#888"/>',
    ]
    for tick in _ticks(x_lo, x_hi):
        x = px(tick)
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{top + plot_h}" x2="{_fmt(x)}" '
            f'y2="{top + plot_h + 4}" stroke="#888"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{top + plot_h + 16}" '
            f'text-anchor="middle">{_fmt(tick)}</text>'
        )
    for tick in _ticks(y_lo, y_hi):
        y = py(tick)
        parts.append(
            f'<line x1="{left - 4}" y1="{_fmt(y)}" x2="{left}" '
            f'y2="{_fmt(y)}" stroke="#888"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{_fmt(y + 3)}" '
            f'text-anchor="end">{_fmt(tick)}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2}" y="{height - 12}" '
        f'text-anchor="middle">{_escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="16" y="{top + plot_h / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + plot_h / 2})">{_escape(y_label)}</text>'
    )

    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = top + 14 * i
        parts.append(
            f'<line x1="{left + plot_w + 10}" y1="{ly + 4}" '
            f'x2="{left + plot_w + 26}" y2="{ly + 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{left + plot_w + 30}" y="{ly + 8}">{_escape(str(label))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def heatmap(values, row_labels, col_labels, title: str, diverging: bool = False) -> str:
    """Render a matrix as colored cells with value text; None cells stay blank.

    diverging=True centers the color scale at 0.5 (win-rate style),
    otherwise 0 maps to white and 1 to full color.
    """
    cell, label_w, top = 56, 110, 48
    rows, cols = len(row_labels), len(col_labels)
    width = label_w + cols * cell + 20
    height = top + rows * cell + 40

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="10" y="20" font-size="14">{_escape(title)}</text>',
    ]
    for j, label in enumerate(col_labels):
        x = label_w + j * cell + cell / 2
        parts.append(
            f'<text x="{_fmt(x)}" y="{top - 8}" text-anchor="middle">'
            f"{_escape(str(label))}</text>"
        )
    for i, label in enumerate(row_labels):
        y = top + i * cell + cell / 2 + 4
        parts.append(
            f'<text x="{label_w - 6}" y="{_fmt(y)}" text-anchor="end">'
            f"{_escape(str(label))}</text>"
        )
        for j in range(cols):
            x, y0 = label_w + j * cell, top + i * cell
            value = values[i][j]
            if value is None:
                parts.append(
                    f'<rect x="{x}" y="{y0}" width="{cell}" height="{cell}" '
                    f'fill="#eee" stroke="#bbb"/>'
                )
                continue
            parts.append(
                f'<rect x="{x}" y="{y0}" width="{cell}" height="{cell}" '
                f'fill="{_cell_color(float(value), diverging)}" stroke="#bbb"/>'
            )
            parts.append(
                f'<text x="{_fmt(x + cell / 2)}" y="{_fmt(y0 + cell / 2 + 4)}" '
                f'text-anchor="middle">{float(value):.2f}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _cell_color(value: float, diverging: bool) -> str:
    value = min(max(value, 0.0), 1.0)
    if diverging:
        # blue below 0.5, red above, white at the center
        if value < 0.5:
            return _blend((33, 102, 172), (255, 255, 255), value * 2.0)
        return _blend((255, 255, 255), (178, 24, 43), (value - 0.5) * 2.0)
    return _blend((255, 255, 255), (43, 140, 190), value)


def _blend(a, b, t: float) -> str:
    channels = tuple(round(a[k] + (b[k] - a[k]) * t) for k in range(3))
    return "#{:02x}{:02x}{:02x}".format(*channels)


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
