"""Dependency-free SVG line charts for learning curves."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 170, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


class PlotError(ValueError):
    pass


def moving_average(values, window=10) -> np.ndarray:
    """Trailing mean over up to ``window`` most recent values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, values.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def read_series(csv_path) -> dict:
    """Team-return series from a metrics CSV or a ``curves.csv``.

    A ``mode`` column splits rows into series; otherwise the file is one
    series named after its parent directory.  Metrics files repeat each
    episode once per agent, so only the first row per episode is kept.
    """
    path = Path(csv_path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            if "episode" not in fields or "team_return" not in fields:
                raise PlotError(f"{path}: needs 'episode' and 'team_return' columns")
            series = {}
            default = path.parent.name or path.stem
            for lineno, row in enumerate(reader, 2):
                name = row.get("mode") or default
                try:
                    episode = int(row["episode"])
                    value = float(row["team_return"])
                except (TypeError, ValueError):
                    raise PlotError(f"{path}:{lineno}: malformed row") from None
                series.setdefault(name, {}).setdefault(episode, value)
    except OSError as exc:
        raise PlotError(str(exc)) from exc
    if not series:
        raise PlotError(f"{path}: no data rows")
    return {name: [pts[k] for k in sorted(pts)] for name, pts in series.items()}


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def render_svg(series: dict, window=10, title="Training performance") -> str:
    """SVG text for ``{label: team returns per episode}``, smoothed with ``window``."""
    if not series or all(len(v) == 0 for v in series.values()):
        raise PlotError("nothing to plot")
    smoothed = {name: moving_average(values, window) for name, values in series.items()}
    n_max = max(len(v) for v in smoothed.values())
    y_all = np.concatenate([v for v in smoothed.values() if len(v)])
    y_lo, y_hi = float(y_all.min()), float(y_all.max())
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    x_hi = max(n_max - 1, 1)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x):
        return MARGIN_LEFT + plot_w * x / x_hi

    def sy(y):
        # SVG y grows downward
        return MARGIN_TOP + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN_LEFT + plot_w / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP + plot_h}" x2="{MARGIN_LEFT + plot_w}" '
        f'y2="{MARGIN_TOP + plot_h}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{MARGIN_TOP + plot_h}" stroke="black"/>',
    ]
    for tx in _ticks(0, x_hi):
        parts.append(f'<text x="{sx(tx):.1f}" y="{MARGIN_TOP + plot_h + 16}" text-anchor="middle">{tx:.0f}</text>')
    for ty in _ticks(y_lo, y_hi):
        parts.append(f'<text x="{MARGIN_LEFT - 6}" y="{sy(ty) + 4:.1f}" text-anchor="end">{ty:.1f}</text>')
        parts.append(f'<line x1="{MARGIN_LEFT}" y1="{sy(ty):.1f}" x2="{MARGIN_LEFT + plot_w}" y2="{sy(ty):.1f}" '
                     f'stroke="#dddddd"/>')
    parts.append(f'<text x="{MARGIN_LEFT + plot_w / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">episode</text>')
    parts.append(f'<text transform="translate(16 {MARGIN_TOP + plot_h / 2:.1f}) rotate(-90)" '
                 f'text-anchor="middle">team return (moving average, {window} episodes)</text>')

    for k, (name, values) in enumerate(smoothed.items()):
        color = COLORS[k % len(COLORS)]
        pts = [(sx(i), sy(v)) for i, v in enumerate(values)]
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        parts.append(f'<polyline class="series" data-label="{escape(name)}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5" points="{coords}"/>')
        for x, y in pts:
            parts.append(f'<circle class="marker" cx="{x:.2f}" cy="{y:.2f}" r="1.8" fill="{color}"/>')
        ly = MARGIN_TOP + 14 + 18 * k
        lx = WIDTH - MARGIN_RIGHT + 14
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_chart(series: dict, out_path, window=10, title="Training performance") -> Path:
    out = Path(out_path)
    out.write_text(render_svg(series, window, title), encoding="utf-8")
    return out


def plot(csv_path, out_path, window=10) -> Path:
    """Render the team-return curves of ``csv_path`` to an SVG file."""
    series = read_series(csv_path)
    return write_chart(series, out_path, window)
