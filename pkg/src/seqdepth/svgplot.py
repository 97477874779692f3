"""Minimal deterministic SVG line charts.

Self-contained SVG 1.1 output built with ElementTree: no stylesheets, fonts
or scripts are referenced, attributes are written in insertion order and all
numbers go through one fixed format, so the same data always yields the same
bytes.  Supports linear and log axes, point markers and a small legend,
which covers everything the sweep reports need.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480
MARGIN_LEFT = 72
MARGIN_RIGHT = 24
MARGIN_TOP = 40
MARGIN_BOTTOM = 56

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)

_FONT = "font-family: sans-serif"


def _fmt(x: float) -> str:
    """One canonical number format for every coordinate in the file."""
    return f"{x:.2f}"


def _fmt_tick(x: float) -> str:
    if x != 0.0 and (abs(x) >= 1e4 or abs(x) < 1e-3):
        return f"{x:.0e}".replace("e+0", "e").replace("e-0", "e-").replace("e+", "e")
    return f"{x:g}"


@dataclass
class Series:
    """One polyline: x and y sequences with a label for the legend."""

    x: list
    y: list
    label: str = ""
    color: str | None = None
    dashed: bool = False
    markers: bool = True


@dataclass
class Axis:
    lo: float
    hi: float
    log: bool

    def to_unit(self, v: float) -> float:
        if self.log:
            return (math.log10(v) - math.log10(self.lo)) / (
                math.log10(self.hi) - math.log10(self.lo)
            )
        return (v - self.lo) / (self.hi - self.lo)

    def ticks(self) -> list:
        if self.log:
            first = math.floor(math.log10(self.lo))
            last = math.ceil(math.log10(self.hi))
            out = [10.0**e for e in range(first, last + 1)]
            return [t for t in out if self.lo / 1.0001 <= t <= self.hi * 1.0001]
        span = self.hi - self.lo
        step = 10.0 ** math.floor(math.log10(span / 4.0))
        for mult in (1.0, 2.0, 5.0, 10.0):
            if span / (step * mult) <= 5.5:
                step *= mult
                break
        first = math.ceil(self.lo / step) * step
        out = []
        t = first
        while t <= self.hi + step * 1e-9:
            out.append(round(t / step) * step)
            t += step
        return out


def _axis_range(values, log: bool) -> Axis:
    vals = [v for v in values if not log or v > 0.0]
    if not vals:
        vals = [1.0, 10.0] if log else [0.0, 1.0]
    lo, hi = min(vals), max(vals)
    if log:
        if lo == hi:
            lo, hi = lo / 10.0, hi * 10.0
        else:
            lo /= 1.15
            hi *= 1.15
    else:
        if lo == hi:
            pad = abs(lo) * 0.5 or 1.0
            lo, hi = lo - pad, hi + pad
        else:
            pad = (hi - lo) * 0.06
            lo, hi = lo - pad, hi + pad
    return Axis(lo, hi, log)


@dataclass
class LineChart:
    """A titled chart assembled from Series and rendered to SVG text."""

    title: str = ""
    x_label: str = ""
    y_label: str = ""
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    log_x: bool = False
    log_y: bool = False
    series: list = field(default_factory=list)

    def add(self, s: Series):
        self.series.append(s)

    def _plot_box(self) -> tuple[float, float, float, float]:
        x0 = MARGIN_LEFT
        y0 = MARGIN_TOP
        x1 = self.width - MARGIN_RIGHT
        y1 = self.height - MARGIN_BOTTOM
        return x0, y0, x1, y1

    def render(self) -> str:
        root = ET.Element(
            "svg",
            {
                "xmlns": "http://www.w3.org/2000/svg",
                "version": "1.1",
                "width": str(self.width),
                "height": str(self.height),
                "viewBox": f"0 0 {self.width} {self.height}",
            },
        )
        ET.SubElement(
            root,
            "rect",
            {"x": "0", "y": "0", "width": str(self.width), "height": str(self.height), "fill": "white"},
        )
        x0, y0, x1, y1 = self._plot_box()

        xs = [v for s in self.series for v in s.x]
        ys = [v for s in self.series for v in s.y]
        ax = _axis_range(xs, self.log_x)
        ay = _axis_range(ys, self.log_y)

        def px(v: float) -> float:
            return x0 + ax.to_unit(v) * (x1 - x0)

        def py(v: float) -> float:
            return y1 - ay.to_unit(v) * (y1 - y0)

        grid = ET.SubElement(root, "g", {"stroke": "#dddddd", "stroke-width": "1"})
        labels = ET.SubElement(
            root, "g", {"fill": "#333333", "style": f"{_FONT}; font-size: 11px"}
        )
        for t in ax.ticks():
            gx = px(t)
            ET.SubElement(
                grid,
                "line",
                {"x1": _fmt(gx), "y1": _fmt(y0), "x2": _fmt(gx), "y2": _fmt(y1)},
            )
            lab = ET.SubElement(
                labels,
                "text",
                {"x": _fmt(gx), "y": _fmt(y1 + 16), "text-anchor": "middle"},
            )
            lab.text = _fmt_tick(t)
        for t in ay.ticks():
            gy = py(t)
            ET.SubElement(
                grid,
                "line",
                {"x1": _fmt(x0), "y1": _fmt(gy), "x2": _fmt(x1), "y2": _fmt(gy)},
            )
            lab = ET.SubElement(
                labels,
                "text",
                {"x": _fmt(x0 - 6), "y": _fmt(gy + 4), "text-anchor": "end"},
            )
            lab.text = _fmt_tick(t)

        ET.SubElement(
            root,
            "rect",
            {
                "x": _fmt(x0),
                "y": _fmt(y0),
                "width": _fmt(x1 - x0),
                "height": _fmt(y1 - y0),
                "fill": "none",
                "stroke": "#333333",
                "stroke-width": "1",
            },
        )

        for k, s in enumerate(self.series):
            color = s.color or PALETTE[k % len(PALETTE)]
            pts = [
                (px(xv), py(yv))
                for xv, yv in zip(s.x, s.y)
                if (not self.log_x or xv > 0.0) and (not self.log_y or yv > 0.0)
            ]
            group_attrs = {"stroke": color, "fill": "none", "stroke-width": "1.5"}
            if s.dashed:
                group_attrs["stroke-dasharray"] = "6 4"
            g = ET.SubElement(root, "g", group_attrs)
            if len(pts) >= 2:
                path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
                ET.SubElement(g, "polyline", {"points": path})
            if s.markers:
                for a, b in pts:
                    ET.SubElement(
                        root,
                        "circle",
                        {"cx": _fmt(a), "cy": _fmt(b), "r": "2.5", "fill": color},
                    )

        if self.title:
            t = ET.SubElement(
                root,
                "text",
                {
                    "x": _fmt((x0 + x1) / 2.0),
                    "y": _fmt(y0 - 14),
                    "text-anchor": "middle",
                    "style": f"{_FONT}; font-size: 14px",
                    "fill": "#000000",
                },
            )
            t.text = self.title
        if self.x_label:
            t = ET.SubElement(
                root,
                "text",
                {
                    "x": _fmt((x0 + x1) / 2.0),
                    "y": _fmt(self.height - 12),
                    "text-anchor": "middle",
                    "style": f"{_FONT}; font-size: 12px",
                    "fill": "#000000",
                },
            )
            t.text = self.x_label
        if self.y_label:
            t = ET.SubElement(
                root,
                "text",
                {
                    "x": "16",
                    "y": _fmt((y0 + y1) / 2.0),
                    "text-anchor": "middle",
                    "style": f"{_FONT}; font-size: 12px",
                    "fill": "#000000",
                    "transform": f"rotate(-90 16 {_fmt((y0 + y1) / 2.0)})",
                },
            )
            t.text = self.y_label

        legended = [s for s in self.series if s.label]
        if legended:
            lg = ET.SubElement(
                root, "g", {"style": f"{_FONT}; font-size: 11px", "fill": "#000000"}
            )
            ly = y0 + 8
            for k, s in enumerate(self.series):
                if not s.label:
                    continue
                color = s.color or PALETTE[k % len(PALETTE)]
                ET.SubElement(
                    lg,
                    "line",
                    {
                        "x1": _fmt(x1 - 120),
                        "y1": _fmt(ly),
                        "x2": _fmt(x1 - 100),
                        "y2": _fmt(ly),
                        "stroke": color,
                        "stroke-width": "2",
                        "stroke-dasharray": "6 4" if s.dashed else "none",
                    },
                )
                txt = ET.SubElement(lg, "text", {"x": _fmt(x1 - 94), "y": _fmt(ly + 4)})
                txt.text = s.label
                ly += 16

        return ET.tostring(root, encoding="unicode") + "\n"


def write_chart(chart: LineChart, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(chart.render())
