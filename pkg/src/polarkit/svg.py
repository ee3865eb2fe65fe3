"""Minimal deterministic SVG grouped bar charts.

Layout is fixed and every coordinate is printed with two decimals, so the
same input always yields the same bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

__all__ = ["bar_chart", "write_svg"]

PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


def _f(x: float) -> str:
    return f"{x:.2f}"


def bar_chart(title: str, categories: Sequence[str], series: Mapping[str, Sequence[float]],
              y_range: tuple[float, float] = (0.0, 1.0), y_label: str = "") -> str:
    """Grouped vertical bars, one group per category and one colour per series.

    Values are clipped to ``y_range``; bars grow from zero when zero lies
    inside the range, so negative values (e.g. PR-gaps) point downwards.
    """
    lo, hi = y_range
    if not hi > lo:
        raise ValueError("empty y range")
    names = list(series)
    for name in names:
        if len(series[name]) != len(categories):
            raise ValueError(f"series {name!r} has {len(series[name])} values for "
                             f"{len(categories)} categories")
    left, right, top, bottom = 60.0, 20.0, 40.0, 90.0
    group_w = max(40.0, 18.0 * max(len(names), 1) + 16.0)
    plot_w = group_w * max(len(categories), 1)
    plot_h = 240.0
    width = left + plot_w + right
    height = top + plot_h + bottom + 18.0 * len(names)

    def y_of(v: float) -> float:
        v = min(max(v, lo), hi)
        return top + plot_h * (hi - v) / (hi - lo)

    base = y_of(min(max(0.0, lo), hi))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{_f(width)}" height="{_f(height)}" fill="#ffffff"/>',
        f'<text x="{_f(width / 2)}" y="20.00" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        y = y_of(v)
        out.append(f'<line x1="{_f(left)}" y1="{_f(y)}" x2="{_f(left + plot_w)}" y2="{_f(y)}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text x="{_f(left - 6)}" y="{_f(y + 4)}" text-anchor="end">{v:.2f}</text>')
    if y_label:
        out.append(f'<text x="14.00" y="{_f(top + plot_h / 2)}" text-anchor="middle" '
                   f'transform="rotate(-90 14.00 {_f(top + plot_h / 2)})">{escape(y_label)}</text>')
    bar_w = (group_w - 16.0) / max(len(names), 1)
    for c, cat in enumerate(categories):
        x0 = left + c * group_w + 8.0
        for s, name in enumerate(names):
            v = float(series[name][c])
            y = y_of(v)
            y1, y2 = min(y, base), max(y, base)
            out.append(f'<rect x="{_f(x0 + s * bar_w)}" y="{_f(y1)}" width="{_f(bar_w)}" '
                       f'height="{_f(y2 - y1)}" fill="{PALETTE[s % len(PALETTE)]}">'
                       f'<title>{escape(name)} {escape(cat)}: {v:.4f}</title></rect>')
        cx = left + c * group_w + group_w / 2
        ly = top + plot_h + 12.0
        out.append(f'<text x="{_f(cx)}" y="{_f(ly)}" text-anchor="end" '
                   f'transform="rotate(-40 {_f(cx)} {_f(ly)})">{escape(cat)}</text>')
    out.append(f'<line x1="{_f(left)}" y1="{_f(base)}" x2="{_f(left + plot_w)}" y2="{_f(base)}" '
               f'stroke="#333333"/>')
    for s, name in enumerate(names):
        y = top + plot_h + bottom + 18.0 * s
        out.append(f'<rect x="{_f(left)}" y="{_f(y - 9)}" width="10.00" height="10.00" '
                   f'fill="{PALETTE[s % len(PALETTE)]}"/>')
        out.append(f'<text x="{_f(left + 16)}" y="{_f(y)}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(svg: str, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(svg, encoding="utf-8")
