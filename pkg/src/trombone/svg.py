"""Static SVG 1.1 plots: airspace snapshots and Monte Carlo scatter."""
from __future__ import annotations

import math
from typing import Iterable, List, Sequence, Tuple
from xml.sax.saxutils import escape

from .geometry import GeometryConfig, Point, path_geometry, position_along, segment_times
from .nlp import Solution
from .simkit import EPS_SEP, BatchReport
from .traffic import Scenario

GREEN = "#2e8b57"
RED = "#d62728"


class _Doc:
    def __init__(self, width: int, height: int):
        self.width, self.height = width, height
        self.items: List[str] = []

    def add(self, tag: str, text: str = "", **attrs) -> None:
        parts = " ".join(f'{k.rstrip("_").replace("_", "-")}="{escape(str(v))}"' for k, v in attrs.items())
        if text:
            self.items.append(f"<{tag} {parts}>{escape(text)}</{tag}>")
        else:
            self.items.append(f"<{tag} {parts}/>")

    def polyline(self, pts: Iterable[Tuple[float, float]], **attrs) -> None:
        self.add("polyline", points=" ".join(f"{x:.2f},{y:.2f}" for x, y in pts), fill="none", **attrs)

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{self.width}" height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>\n'
        )
        return head + "\n".join(self.items) + "\n</svg>\n"


def snapshot_svg(
    scenario: Scenario, solution: Solution, t: float, size: int = 720, title: str = ""
) -> str:
    """Aircraft positions at simulation time ``t`` with their remaining paths.

    Consecutive landings that are both airborne are joined in green when
    well separated, red when their slack exceeds the violation threshold.
    """
    cfg: GeometryConfig = scenario.config
    extent = max(cfg.tcp_radius, *(max(abs(p.x), abs(p.y)) for p in cfg.gates.values())) * 1.15
    scale = size / (2 * extent)

    def xy(p) -> Tuple[float, float]:
        return (p[0] + extent) * scale, (extent - p[1]) * scale

    doc = _Doc(size, size)
    cx, cy = xy((0.0, 0.0))
    doc.add("circle", cx=f"{cx:.2f}", cy=f"{cy:.2f}", r=f"{cfg.tcp_radius * scale:.2f}",
            fill="none", stroke="#888", stroke_dasharray="6,4")
    doc.polyline([xy(cfg.faf), xy((0.0, 0.0))], stroke="#444", stroke_width="2")
    for name, g in cfg.gates.items():
        gx, gy = xy(g)
        doc.add("rect", x=f"{gx - 5:.2f}", y=f"{gy - 5:.2f}", width="10", height="10", fill="#1f77b4")
        doc.add("text", name, x=f"{gx + 8:.2f}", y=f"{gy - 8:.2f}", font_size="12", font_family="sans-serif")
    fx, fy = xy(cfg.faf)
    doc.add("polygon", points=f"{fx:.2f},{fy - 7:.2f} {fx - 6:.2f},{fy + 5:.2f} {fx + 6:.2f},{fy + 5:.2f}", fill="#000")
    doc.add("text", "FAF", x=f"{fx - 10:.2f}", y=f"{fy + 20:.2f}", font_size="12", font_family="sans-serif")
    doc.add("circle", cx=f"{cx:.2f}", cy=f"{cy:.2f}", r="4", fill="#000")
    doc.add("text", "THR (0,0)", x=f"{cx + 6:.2f}", y=f"{cy + 16:.2f}", font_size="11", font_family="sans-serif")

    airborne = {}
    for k, plan in enumerate(solution.plans):
        arr = scenario.arrivals[plan.arrival_id]
        elapsed = t - arr.entry_time_tau
        if elapsed < 0 or t > plan.faf_time_t:
            continue
        geom = plan.geometry
        total = sum(segment_times(geom, plan.speeds))
        pos = position_along(cfg, arr.entry_point, geom, plan.speeds, elapsed)
        steps = max(2, int((total - elapsed) / 5.0) + 1)
        rest = [position_along(cfg, arr.entry_point, geom, plan.speeds, elapsed + (total - elapsed) * i / steps)
                for i in range(steps + 1)]
        doc.polyline([xy(p) for p in rest], stroke="#1f77b4", stroke_width="1", stroke_opacity="0.6")
        airborne[k] = pos

    for k in sorted(airborne):
        if k - 1 in airborne:
            ok = solution.slacks_sigma[k - 1] <= EPS_SEP
            doc.polyline([xy(airborne[k - 1]), xy(airborne[k])], stroke=GREEN if ok else RED,
                         stroke_width="1.5")
    for k in sorted(airborne):
        px, py = xy(airborne[k])
        doc.add("circle", cx=f"{px:.2f}", cy=f"{py:.2f}", r="4", fill="#ff7f0e", stroke="#000")
        doc.add("text", str(solution.plans[k].arrival_id), x=f"{px + 5:.2f}", y=f"{py - 5:.2f}",
                font_size="10", font_family="sans-serif")
    label = title or f"t = {t:.1f} s, airborne: {len(airborne)}"
    doc.add("text", label, x="10", y="20", font_size="14", font_family="sans-serif")
    return doc.render()


def _ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _panel(doc: _Doc, box, xs: Sequence[float], ys: Sequence[float], xlim, ylabel: str,
           vline: float, xlabel: str) -> None:
    x0, y0, w, h = box
    ymax = max(ys, default=1.0)
    ylim = (0.0, ymax * 1.05 if ymax > 0 else 1.0)

    def sx(v):
        return x0 + (v - xlim[0]) / (xlim[1] - xlim[0]) * w

    def sy(v):
        return y0 + h - (v - ylim[0]) / (ylim[1] - ylim[0]) * h

    doc.add("rect", x=x0, y=y0, width=w, height=h, fill="none", stroke="#000")
    for tx in _ticks(*xlim):
        doc.polyline([(sx(tx), y0 + h), (sx(tx), y0 + h + 5)], stroke="#000")
        doc.add("text", f"{tx:g}", x=f"{sx(tx):.2f}", y=f"{y0 + h + 18:.2f}", font_size="11",
                text_anchor="middle", font_family="sans-serif")
    for ty in _ticks(*ylim):
        doc.polyline([(x0 - 5, sy(ty)), (x0, sy(ty))], stroke="#000")
        doc.add("text", f"{ty:g}", x=f"{x0 - 8:.2f}", y=f"{sy(ty) + 4:.2f}", font_size="11",
                text_anchor="end", font_family="sans-serif")
    for x, y in zip(xs, ys):
        doc.add("circle", cx=f"{sx(x):.2f}", cy=f"{sy(y):.2f}", r="2.5", fill="#1f77b4", fill_opacity="0.6")
    if xlim[0] <= vline <= xlim[1]:
        doc.polyline([(sx(vline), y0), (sx(vline), y0 + h)], stroke=RED, stroke_dasharray="6,4",
                     stroke_width="1.5")
        doc.add("text", f"3600/T_sep = {vline:.2f}", x=f"{sx(vline) + 4:.2f}", y=f"{y0 + 14:.2f}",
                font_size="11", fill=RED, font_family="sans-serif")
    doc.add("text", ylabel, x=f"{x0 + 4:.2f}", y=f"{y0 - 6:.2f}", font_size="12", font_family="sans-serif")
    doc.add("text", xlabel, x=f"{x0 + w / 2:.2f}", y=f"{y0 + h + 34:.2f}", font_size="12",
            text_anchor="middle", font_family="sans-serif")


def scatter_svg(report: BatchReport, width: int = 760, height: int = 640) -> str:
    """Violation percentage and total stretch against achieved FAF landing rate."""
    runs = [r for r in report.runs if r.n_aircraft > 1]
    xs = [r.faf_landing_rate for r in runs]
    cap = report.capacity_threshold
    hi = max(xs + [cap]) * 1.05
    xlim = (0.0, hi if hi > 0 else 1.0)
    doc = _Doc(width, height)
    doc.add("text", f"Monte Carlo: {len(report.runs)} runs", x="10", y="20", font_size="14",
            font_family="sans-serif")
    ph = (height - 160) / 2
    _panel(doc, (70, 50, width - 100, ph), xs, [r.violation_pct for r in runs], xlim,
           "separation violations (%)", cap, "")
    _panel(doc, (70, 50 + ph + 60, width - 100, ph), xs, [r.total_stretch for r in runs], xlim,
           "total path stretch (NM)", cap, "FAF landing rate (aircraft/hour)")
    return doc.render()
