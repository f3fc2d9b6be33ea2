"""Minimal deterministic SVG chart emitter (no plotting dependency)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

# Fixed palette and epoch gradient (dark blue -> yellow).
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf"]
GRADIENT = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)]


def _num(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def escape(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def gradient_color(u: float) -> str:
    """Colour at position ``u`` in [0, 1] of the fixed gradient."""
    u = min(max(u, 0.0), 1.0) * (len(GRADIENT) - 1)
    i = min(int(u), len(GRADIENT) - 2)
    f = u - i
    a, b = GRADIENT[i], GRADIENT[i + 1]
    return "#" + "".join(f"{round(x + (y - x) * f):02x}" for x, y in zip(a, b))


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _tick_label(v: float) -> str:
    return f"{v:g}"


@dataclass
class Axes:
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    left: float
    top: float
    width: float
    height: float

    def px(self, x: float) -> float:
        lo, hi = self.x_range
        return self.left + (x - lo) / (hi - lo) * self.width

    def py(self, y: float) -> float:
        lo, hi = self.y_range
        return self.top + self.height - (y - lo) / (hi - lo) * self.height


def padded_range(values: Sequence[float], include: Sequence[float] = (), pad: float = 0.05) -> tuple[float, float]:
    vals = [*values, *include]
    lo, hi = min(vals), max(vals)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


@dataclass
class Figure:
    width: int = 640
    height: int = 440
    elements: list[str] = field(default_factory=list)

    def add(self, element: str) -> None:
        self.elements.append(element)

    def text(self, x, y, s, size=12, anchor="middle", rotate=None, color="#222") -> None:
        tr = f' transform="rotate({rotate} {_num(x)} {_num(y)})"' if rotate is not None else ""
        self.add(f'<text x="{_num(x)}" y="{_num(y)}" font-size="{size}" text-anchor="{anchor}" '
                 f'fill="{color}"{tr}>{escape(s)}</text>')

    def line(self, x1, y1, x2, y2, color="#000", width=1.0, dash=None) -> None:
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<line x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}" '
                 f'stroke="{color}" stroke-width="{_num(width)}"{d}/>')

    def circle(self, x, y, r, color, stroke=None) -> None:
        s = f' stroke="{stroke}" stroke-width="0.8"' if stroke else ""
        self.add(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="{_num(r)}" fill="{color}"{s}/>')

    def rect(self, x, y, w, h, color, stroke=None) -> None:
        s = f' stroke="{stroke}"' if stroke else ""
        self.add(f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(w)}" height="{_num(h)}" '
                 f'fill="{color}"{s}/>')

    def polyline(self, points, color, width=1.5, dash=None) -> None:
        pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in points)
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                 f'stroke-width="{_num(width)}"{d}/>')

    def axes(self, x_range, y_range, x_label, y_label, title=None, margins=(70, 40, 50, 60),
             x_ticks=None, y_ticks=None) -> Axes:
        """Draw frame, grid and tick labels; ``margins`` is (left, top, right, bottom)."""
        ml, mt, mr, mb = margins
        ax = Axes(x_range, y_range, ml, mt, self.width - ml - mr, self.height - mt - mb)
        self.rect(ax.left, ax.top, ax.width, ax.height, "#ffffff", stroke="#444")
        for v in (y_ticks if y_ticks is not None else nice_ticks(*y_range)):
            if y_range[0] <= v <= y_range[1]:
                y = ax.py(v)
                self.line(ax.left, y, ax.left + ax.width, y, "#e0e0e0", 0.8)
                self.text(ax.left - 6, y + 4, _tick_label(v), 10, "end")
        for v in (x_ticks if x_ticks is not None else nice_ticks(*x_range)):
            if isinstance(v, tuple):
                v, label = v
            else:
                label = _tick_label(v)
            if x_range[0] <= v <= x_range[1]:
                x = ax.px(v)
                self.line(x, ax.top, x, ax.top + ax.height, "#f0f0f0", 0.8)
                self.text(x, ax.top + ax.height + 16, label, 10)
        self.text(ax.left + ax.width / 2, self.height - 14, x_label, 12)
        self.text(18, ax.top + ax.height / 2, y_label, 12, rotate=-90)
        if title:
            self.text(self.width / 2, 22, title, 14)
        return ax

    def legend(self, x, y, entries: Sequence[tuple[str, str]]) -> None:
        for i, (label, color) in enumerate(entries):
            yy = y + 16 * i
            self.rect(x, yy - 8, 10, 10, color)
            self.text(x + 14, yy + 1, label, 10, "start")

    def to_svg(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
                f'font-family="sans-serif">')
        return "\n".join([head, *self.elements, "</svg>"]) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_svg())
