"""SVG line charts rendered from a Jinja2 template.

One polyline per curve, optional point markers and horizontal reference
lines, axes auto-fitted to the data. The fitted ranges are written into the
SVG so a reader can map pixels back to values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape

logger = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parents[1]
TEMPLATES_DIR = ROOT / "templates"

WIDTH, HEIGHT = 720, 480
MARGIN = {"left": 80, "right": 30, "top": 40, "bottom": 60}
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]

_env = Environment(
    loader=FileSystemLoader(str(TEMPLATES_DIR)),
    autoescape=select_autoescape(enabled_extensions=("svg", "j2", "xml")),
    trim_blocks=True,
    lstrip_blocks=True,
)


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False
    color: Optional[str] = None


@dataclass
class Marker:
    x: float
    y: float
    label: str = ""


@dataclass
class Figure:
    title: str
    x_label: str
    y_label: str
    series: List[Series] = field(default_factory=list)
    markers: List[Marker] = field(default_factory=list)
    hlines: List[Tuple[float, str]] = field(default_factory=list)


def _nice_range(lo: float, hi: float) -> Tuple[float, float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return 0.0, 1.0
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        pad = 0.5 * max(abs(hi), 1.0)
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, count: int = 6) -> List[float]:
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step) + 1)]


def _fit(fig: Figure) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    xs, ys = [], []
    for s in fig.series:
        x, y = np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        xs.append(x[ok])
        ys.append(y[ok])
    xs.extend(np.array([m.x]) for m in fig.markers)
    ys.extend(np.array([m.y]) for m in fig.markers)
    ys.extend(np.array([v]) for v, _ in fig.hlines)
    x_all = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    y_all = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    return _nice_range(float(x_all.min()), float(x_all.max())), _nice_range(float(y_all.min()), float(y_all.max()))


def render_svg(fig: Figure) -> str:
    (x0, x1), (y0, y1) = _fit(fig)
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x: float) -> float:
        return MARGIN["left"] + (x - x0) / (x1 - x0) * plot_w

    def py(y: float) -> float:
        return MARGIN["top"] + (y1 - y) / (y1 - y0) * plot_h

    lines = []
    for i, s in enumerate(fig.series):
        x, y = np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        points = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        lines.append(
            {
                "label": s.label,
                "points": points,
                "color": s.color or PALETTE[i % len(PALETTE)],
                "dashed": s.dashed,
                "legend_y": MARGIN["top"] + 16 + 18 * i,
            }
        )
    context = {
        "width": WIDTH,
        "height": HEIGHT,
        "margin": MARGIN,
        "plot_w": plot_w,
        "plot_h": plot_h,
        "title": fig.title,
        "x_label": fig.x_label,
        "y_label": fig.y_label,
        "x_range": (x0, x1),
        "y_range": (y0, y1),
        "x_ticks": [(px(t), f"{t:g}") for t in _ticks(x0, x1)],
        "y_ticks": [(py(t), f"{t:g}") for t in _ticks(y0, y1)],
        "lines": lines,
        "markers": [{"x": px(m.x), "y": py(m.y), "label": m.label} for m in fig.markers],
        "hlines": [{"y": py(v), "label": label} for v, label in fig.hlines],
    }
    return _env.get_template("graph.svg.j2").render(**context)


def generate_svg_graph(fig: Figure, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(fig), encoding="utf-8")
    logger.debug("wrote figure %s (%d curves)", path, len(fig.series))
    return path
