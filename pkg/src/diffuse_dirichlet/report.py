"""CSV tables and log-log SVG plots of convergence studies."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Mapping, Sequence

from .analysis import ConvergenceTable, ErrorReport

CSV_HEADER = (
    "param",
    "eps",
    "h",
    "delta",
    "kappa",
    "l2",
    "h1_semi",
    "h1_full",
    "linf_omega",
    "linf_outside",
    "free_dofs",
    "vertices",
)
_INT_COLUMNS = {"free_dofs", "vertices"}


def _fmt(v: float) -> str:
    # shortest repr that round-trips; locale independent
    return repr(float(v))


def table_to_csv(table: ConvergenceTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for param, r in zip(table.params, table.reports):
        row = [_fmt(param)]
        for name in CSV_HEADER[1:]:
            v = getattr(r, name)
            row.append(str(int(v)) if name in _INT_COLUMNS else _fmt(v))
        writer.writerow(row)
    return buf.getvalue()


def write_csv(table: ConvergenceTable, path) -> None:
    path = Path(path)
    try:
        path.write_text(table_to_csv(table), encoding="ascii", newline="")
    except OSError as exc:
        raise OSError(f"cannot write CSV table to {path}: {exc}") from exc


def read_csv(path, param_name: str = "param") -> ConvergenceTable:
    table = ConvergenceTable(param_name)
    with Path(path).open(encoding="ascii", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            kwargs = {k: (int(row[k]) if k in _INT_COLUMNS else float(row[k])) for k in CSV_HEADER[1:]}
            table.append(float(row["param"]), ErrorReport(**kwargs))
    return table


# ---------------------------------------------------------------------------
# SVG


def reference_line(slope: float, anchor: tuple[float, float]):
    """``y = c x^slope`` passing through ``anchor``."""
    x0, y0 = anchor
    c = y0 / x0**slope
    return lambda x: c * x**slope


class _LogAxes:
    def __init__(self, xs, ys, box, pad=0.25):
        lx = [math.log2(x) for x in xs]
        ly = [math.log2(y) for y in ys]
        self.x0, self.x1 = min(lx) - pad, max(lx) + pad
        self.y0, self.y1 = min(ly) - pad, max(ly) + pad
        self.left, self.top, self.width, self.height = box

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        px = self.left + (math.log2(x) - self.x0) / (self.x1 - self.x0) * self.width
        py = self.top + (self.y1 - math.log2(y)) / (self.y1 - self.y0) * self.height
        return px, py


def _ticks(lo: float, hi: float) -> list[int]:
    lo_i, hi_i = math.ceil(lo), math.floor(hi)
    step = max(1, (hi_i - lo_i) // 6 + 1)
    return list(range(lo_i, hi_i + 1, step))


def _panel(out, xs, ys, slope, label, param_label, box):
    axes = _LogAxes(xs, ys, box)
    left, top, width, height = box
    out.append(f'<rect x="{left:.2f}" y="{top:.2f}" width="{width:.2f}" height="{height:.2f}" fill="none" stroke="black"/>')
    for k in _ticks(axes.x0, axes.x1):
        px, _ = axes(2.0**k, 2.0**axes.y0)
        out.append(f'<line x1="{px:.2f}" y1="{top + height:.2f}" x2="{px:.2f}" y2="{top + height + 4:.2f}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{top + height + 16:.2f}" font-size="10" text-anchor="middle">2^{k}</text>')
    for k in _ticks(axes.y0, axes.y1):
        _, py = axes(2.0**axes.x0, 2.0**k)
        out.append(f'<line x1="{left - 4:.2f}" y1="{py:.2f}" x2="{left:.2f}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 6:.2f}" y="{py + 3:.2f}" font-size="10" text-anchor="end">2^{k}</text>')
    out.append(
        f'<text x="{left + width / 2:.2f}" y="{top + height + 32:.2f}" font-size="12" text-anchor="middle">{param_label}</text>'
    )
    if slope is not None:
        ref = reference_line(slope, (xs[0], ys[0]))
        xa, xb = min(xs), max(xs)
        (pa, qa), (pb, qb) = axes(xa, ref(xa)), axes(xb, ref(xb))
        out.append(f'<line class="reference" x1="{pa:.2f}" y1="{qa:.2f}" x2="{pb:.2f}" y2="{qb:.2f}" stroke="black"/>')
        label = f"{label} (ref. slope {slope:g})"
    for x, y in zip(xs, ys):
        px, py = axes(x, y)
        out.append(
            f'<path class="marker" d="M{px - 4:.2f},{py - 4:.2f} L{px + 4:.2f},{py + 4:.2f} '
            f'M{px - 4:.2f},{py + 4:.2f} L{px + 4:.2f},{py - 4:.2f}" stroke="black" fill="none"/>'
        )
    out.append(f'<text x="{left + 6:.2f}" y="{top + 14:.2f}" font-size="11">{label}</text>')


def svg_loglog(
    params: Sequence[float],
    series: Mapping[str, Sequence[float]],
    reference_slopes: Mapping[str, float] | None = None,
    param_label: str = "param",
) -> str:
    """One log-log panel per series: crosses for data, a solid reference line."""
    reference_slopes = reference_slopes or {}
    panel_w, panel_h, margin = 240.0, 200.0, 60.0
    width = margin + len(series) * (panel_w + margin)
    height = panel_h + 2 * margin
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for k, (name, ys) in enumerate(series.items()):
        if any(y <= 0 for y in ys) or any(x <= 0 for x in params):
            raise ValueError("log-log plot needs positive values")
        box = (margin + k * (panel_w + margin), margin / 2, panel_w, panel_h)
        _panel(out, list(params), list(ys), reference_slopes.get(name), name, param_label, box)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg_loglog(
    table: ConvergenceTable,
    norms: Sequence[str],
    reference_slopes: Mapping[str, float] | None,
    path,
) -> None:
    series = {n: table.column(n).tolist() for n in norms}
    text = svg_loglog(table.params, series, reference_slopes, table.param_name)
    Path(path).write_text(text, encoding="ascii")
