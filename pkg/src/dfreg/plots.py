"""Deterministic SVG rendering of run artifacts.

Charts are regenerated from CSV only, so they are a derived convenience:
deleting every SVG loses nothing. Rendering is plain string assembly with
fixed canvas geometry and %.6g coordinate formatting, which makes repeated
exports byte-identical.
"""

import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError

PALETTE = ("#1b6ca8", "#c0392b", "#27ae60", "#8e44ad",
           "#e67e22", "#2c3e50", "#16a085", "#d35400")
WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 170, 40, 50


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def _f(v: float) -> str:
    return "%.6g" % v


def read_csv(path):
    """Rows of a comma-separated file as dicts; '#' lines are skipped."""
    path = Path(path)
    header = None
    rows = []
    for line in path.read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        cells = line.split(",")
        if header is None:
            header = cells
            continue
        if len(cells) != len(header):
            raise ParseError(
                f"{path.name}: row has {len(cells)} cells, header has {len(header)}"
            )
        rows.append(dict(zip(header, cells)))
    if header is None:
        raise ParseError(f"{path.name}: no header row found")
    return header, rows


def read_spectrum_csv(path):
    """Parse a spectrum export back into (grid, sidecar dict)."""
    grid_rows = []
    sidecar = {}
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        if "=" in line and "," not in line:
            key, _, value = line.partition("=")
            sidecar[key] = float(value)
        else:
            grid_rows.append([float(v) for v in line.split(",")])
    if not grid_rows:
        raise ParseError(f"{Path(path).name}: no spectrum grid found")
    return np.array(grid_rows), sidecar


def line_chart(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """SVG line chart; series maps label -> (xs, ys). Non-finite points
    are dropped."""
    clean = {}
    for label, (xs, ys) in series.items():
        pts = [(x, y) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y)]
        if pts:
            clean[label] = pts
    if not clean:
        raise ConfigError(f"no finite data to plot for {title!r}")
    all_x = [p[0] for pts in clean.values() for p in pts]
    all_y = [p[1] for pts in clean.values() for p in pts]
    x0, x1 = min(all_x), max(all_x)
    y0, y1 = min(all_y), max(all_y)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = abs(y0) * 0.1 + 1e-9
        y0, y1 = y0 - pad, y1 + pad
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + plot_w * (x - x0) / (x1 - x0)

    def py(y):
        return MARGIN_T + plot_h * (1.0 - (y - y0) / (y1 - y0))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{_esc(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#888888"/>',
    ]
    for i in range(5):
        frac = i / 4.0
        gx = x0 + frac * (x1 - x0)
        gy = y0 + frac * (y1 - y0)
        xp, yp = px(gx), py(gy)
        parts.append(
            f'<line x1="{_f(xp)}" y1="{MARGIN_T}" x2="{_f(xp)}" '
            f'y2="{MARGIN_T + plot_h}" stroke="#dddddd"/>'
        )
        parts.append(
            f'<line x1="{MARGIN_L}" y1="{_f(yp)}" x2="{MARGIN_L + plot_w}" '
            f'y2="{_f(yp)}" stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{_f(xp)}" y="{MARGIN_T + plot_h + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_f(gx)}</text>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{_f(yp + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_f(gy)}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_L + plot_w // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{_esc(xlabel)}</text>'
    )
    parts.append(
        f'<text x="16" y="{MARGIN_T + plot_h // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN_T + plot_h // 2})">{_esc(ylabel)}</text>'
    )
    for i, (label, pts) in enumerate(clean.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_f(px(x))},{_f(py(y))}" for x, y in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        ly = MARGIN_T + 14 + 16 * i
        lx = MARGIN_L + plot_w + 10
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 22}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{_esc(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def heatmap(grid: np.ndarray, title: str, scale: str = "linear") -> str:
    """Grayscale heatmap of a small grid, min-max normalized; the
    normalization bounds (and scale) are recorded in the file."""
    if scale not in ("linear", "log"):
        raise ConfigError(f"scale must be 'linear' or 'log', got {scale!r}")
    grid = np.asarray(grid, dtype=np.float64)
    values = grid if scale == "linear" else np.log10(grid + 1e-12)
    vmin, vmax = float(values.min()), float(values.max())
    rows, cols = grid.shape
    cell = max(1, min(360 // max(rows, 1), 360 // max(cols, 1)))
    map_w, map_h = cell * cols, cell * rows
    width = map_w + 40
    height = map_h + 80
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width // 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{_esc(title)}</text>',
    ]
    for r in range(rows):
        for c in range(cols):
            if vmax > vmin:
                norm = (values[r, c] - vmin) / (vmax - vmin)
            else:
                norm = 0.5
            level = int(round(255 * norm))
            color = f"#{level:02x}{level:02x}{level:02x}"
            parts.append(
                f'<rect x="{20 + c * cell}" y="{32 + r * cell}" width="{cell}" '
                f'height="{cell}" fill="{color}" stroke="#bbbbbb"/>'
            )
    parts.append(
        f'<text x="20" y="{map_h + 52}" font-family="sans-serif" font-size="11">'
        f'scale={scale} min={vmin!r} max={vmax!r}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _metric_series(rows, metric):
    series = {}
    for row in rows:
        key = f"{row['variant']}-s{row['seed']}"
        xs, ys = series.setdefault(key, ([], []))
        xs.append(float(row["epoch"]))
        ys.append(float(row[metric]))
    return series


def export_plots(run_dir, out_dir, spectrum_scale: str = "both") -> list:
    """Render accuracy/loss/entropy charts and spectrum heatmaps from the
    CSVs under a run (or comparison) directory. Returns written paths."""
    if spectrum_scale not in ("linear", "log", "both"):
        raise ConfigError(
            f"spectrum scale must be linear, log, or both, got {spectrum_scale!r}"
        )
    run_dir = Path(run_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = None
    for candidate in ("metrics.csv", "comparison.csv"):
        if (run_dir / candidate).exists():
            csv_path = run_dir / candidate
            break
    if csv_path is None:
        raise ConfigError(f"no metrics.csv or comparison.csv under {run_dir}")
    _, rows = read_csv(csv_path)
    written = []
    charts = (
        ("accuracy.svg", "test_acc", "test accuracy"),
        ("loss.svg", "train_loss", "mean train loss"),
        ("test_loss.svg", "test_loss", "test loss"),
        ("entropy.svg", "entropy_global", "global conv entropy (nats)"),
    )
    for filename, metric, ylabel in charts:
        svg = line_chart(_metric_series(rows, metric),
                         title=f"{metric} by epoch", xlabel="epoch",
                         ylabel=ylabel)
        path = out_dir / filename
        path.write_text(svg)
        written.append(path)
    scales = ("linear", "log") if spectrum_scale == "both" else (spectrum_scale,)
    for spectrum_path in sorted(run_dir.glob("**/spectrum_*.csv")):
        grid, _ = read_spectrum_csv(spectrum_path)
        stem = spectrum_path.stem
        for scale in scales:
            svg = heatmap(grid, title=f"{stem} ({scale})", scale=scale)
            path = out_dir / f"{stem}_{scale}.svg"
            path.write_text(svg)
            written.append(path)
    return written
