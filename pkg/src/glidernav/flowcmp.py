"""Deployment-level comparison of glider-estimated, model, and fused flow.

Builds one table with three sources: the glider's own per-dive estimates
at their mid-dive times, the raw model on a uniform lattice, and the
bias-corrected model on the same lattice extended 12 hours past the last
surfacing (the stretch pilots actually plan into).  Vectors are also
decomposed into alongshore/crossshore components for the configured
coastline bearing.

The strong-flow check is a conjunction: an alert fires only when both the
glider estimate and the fused prediction exceed the threshold (default
0.3 m/s), the regime where the current can outrun the glider.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .flowfield import FlowSource
from .fusion import FusionState, fused_sample
from .geo import LatLon, decompose_shore

FORWARD_EXTENSION_S = 43_200.0
DEFAULT_LATTICE_DT_S = 600.0
DEFAULT_STRONG_FLOW_MPS = 0.3

GLIDER = "glider"
MODEL = "model"
FUSED = "fused"


@dataclass(frozen=True)
class TableRow:
    t: float
    source: str
    u: float
    v: float
    along: float
    cross: float


@dataclass
class ComparisonTable:
    rows: list[TableRow]
    last_event_t: float | None = None

    def by_source(self, source: str) -> list[TableRow]:
        return [r for r in self.rows if r.source == source]


@dataclass(frozen=True)
class StrongFlowAlert:
    t: float
    glider_speed: float
    fused_speed: float
    model_speed: float


def _row(t: float, source: str, u: float, v: float, shore_bearing: float) -> TableRow:
    along, cross = decompose_shore(u, v, shore_bearing)
    return TableRow(t=t, source=source, u=u, v=v, along=along, cross=cross)


def _position_at(events, t: float) -> LatLon:
    """Glider position to evaluate shore-side predictions at: the latest fix."""
    pos = events[0].gps_pos
    for ev in events:
        if ev.t_end <= t:
            pos = ev.gps_pos
        else:
            break
    return pos


def build_table(
    events,
    model: FlowSource,
    fusion: FusionState,
    shore_bearing: float,
    lattice_dt: float = DEFAULT_LATTICE_DT_S,
) -> ComparisonTable:
    """Assemble the three-source comparison over a deployment.

    The model/fused lattice runs from the first dive's start to exactly
    12 hours past the last surfacing; past the last surfacing the fused
    correction decays, which is the forward-prediction stretch.
    """
    if not events:
        raise ValueError("cannot compare flows without surfacing events")
    if lattice_dt <= 0:
        raise ValueError("lattice step must be positive")
    events = sorted(events, key=lambda e: e.t_end)
    rows: list[TableRow] = []
    for ev in events:
        if ev.flow_estimate is None:
            continue
        t_mid = 0.5 * (ev.t_start + ev.t_end)
        rows.append(_row(t_mid, GLIDER, ev.flow_estimate.u, ev.flow_estimate.v, shore_bearing))
    t_last = events[-1].t_end
    t_stop = t_last + FORWARD_EXTENSION_S
    lattice = []
    t = events[0].t_start
    while t <= t_stop:
        lattice.append(t)
        t += lattice_dt
    if lattice[-1] != t_stop:
        lattice.append(t_stop)
    for t in lattice:
        p = _position_at(events, t)
        raw = model.sample(p, t, clamp=True)
        rows.append(_row(t, MODEL, raw.u, raw.v, shore_bearing))
    for t in lattice:
        p = _position_at(events, t)
        fused = fused_sample(fusion, model, p, t, clamp=True)
        rows.append(_row(t, FUSED, fused.u, fused.v, shore_bearing))
    return ComparisonTable(rows=rows, last_event_t=t_last)


def _nearest(rows: list[TableRow], t: float) -> TableRow:
    return min(rows, key=lambda r: (abs(r.t - t), r.t))


def detect_strong_flow(
    table: ComparisonTable, threshold: float = DEFAULT_STRONG_FLOW_MPS
) -> list[StrongFlowAlert]:
    """Alert where glider estimate AND fused prediction both exceed threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    fused_rows = table.by_source(FUSED)
    model_rows = table.by_source(MODEL)
    alerts = []
    for row in table.by_source(GLIDER):
        est = math.hypot(row.u, row.v)
        fused = math.hypot(*_uv(_nearest(fused_rows, row.t))) if fused_rows else 0.0
        if est > threshold and fused > threshold:
            model = math.hypot(*_uv(_nearest(model_rows, row.t))) if model_rows else 0.0
            alerts.append(
                StrongFlowAlert(
                    t=row.t, glider_speed=est, fused_speed=fused, model_speed=model
                )
            )
    return alerts


def _uv(row: TableRow) -> tuple[float, float]:
    return row.u, row.v


def emit_csv(table: ComparisonTable) -> bytes:
    if not table.rows:
        raise ValueError("refusing to emit an empty table")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "source", "u", "v", "along", "cross"])
    for r in table.rows:
        writer.writerow([repr(r.t), r.source, repr(r.u), repr(r.v), repr(r.along), repr(r.cross)])
    return buf.getvalue().encode("ascii")


def parse_csv(data: bytes) -> ComparisonTable:
    reader = csv.reader(io.StringIO(data.decode("ascii")))
    header = next(reader, None)
    if header != ["t", "source", "u", "v", "along", "cross"]:
        raise ValueError(f"unexpected flow-table header {header}")
    rows = [
        TableRow(
            t=float(t), source=source, u=float(u), v=float(v),
            along=float(along), cross=float(cross),
        )
        for t, source, u, v, along, cross in reader
    ]
    glider_ts = [r.t for r in rows if r.source == GLIDER]
    return ComparisonTable(rows=rows, last_event_t=max(glider_ts) if glider_ts else None)


# --------------------------------------------------------------------------
# SVG rendering: two stacked panels (alongshore on top, crossshore below),
# one polyline per source, dashed vertical rule at the last surfacing time.

_WIDTH = 900
_PANEL_H = 260
_MARGIN = 50
_COLORS = {GLIDER: "#d62728", MODEL: "#1f77b4", FUSED: "#2ca02c"}


def emit_svg(table: ComparisonTable) -> bytes:
    if not table.rows:
        raise ValueError("refusing to render an empty table")
    t_min = min(r.t for r in table.rows)
    t_max = max(r.t for r in table.rows)
    t_span = (t_max - t_min) or 1.0
    height = 2 * _PANEL_H + 3 * _MARGIN

    def x_of(t: float) -> float:
        return _MARGIN + (t - t_min) / t_span * (_WIDTH - 2 * _MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{height}" viewBox="0 0 {_WIDTH} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for panel, attr in enumerate(("along", "cross")):
        top = _MARGIN + panel * (_PANEL_H + _MARGIN)
        values = [getattr(r, attr) for r in table.rows]
        v_min, v_max = min(values + [0.0]), max(values + [0.0])
        v_span = (v_max - v_min) or 1.0

        def y_of(v: float) -> float:
            return top + (v_max - v) / v_span * _PANEL_H

        out.append(
            f'<text x="{_MARGIN}" y="{top - 8}" font-size="14">'
            f"{attr}shore flow (m/s)</text>"
        )
        out.append(
            f'<rect x="{_MARGIN}" y="{top}" width="{_WIDTH - 2 * _MARGIN}" '
            f'height="{_PANEL_H}" fill="none" stroke="#999"/>'
        )
        zero_y = y_of(0.0)
        out.append(
            f'<line x1="{_MARGIN}" y1="{zero_y:.2f}" x2="{_WIDTH - _MARGIN}" '
            f'y2="{zero_y:.2f}" stroke="#ddd"/>'
        )
        for source in (GLIDER, MODEL, FUSED):
            rows = table.by_source(source)
            if not rows:
                continue
            pts = " ".join(
                f"{x_of(r.t):.2f},{y_of(getattr(r, attr)):.2f}" for r in rows
            )
            out.append(
                f'<polyline fill="none" stroke="{_COLORS[source]}" '
                f'stroke-width="1.5" data-source="{source}" points="{pts}"/>'
            )
        if table.last_event_t is not None:
            x = x_of(table.last_event_t)
            out.append(
                f'<line x1="{x:.2f}" y1="{top}" x2="{x:.2f}" '
                f'y2="{top + _PANEL_H}" stroke="black" stroke-dasharray="6,4"/>'
            )
    legend_y = height - 12
    for i, source in enumerate((GLIDER, MODEL, FUSED)):
        x = _MARGIN + i * 180
        out.append(
            f'<line x1="{x}" y1="{legend_y - 4}" x2="{x + 28}" y2="{legend_y - 4}" '
            f'stroke="{_COLORS[source]}" stroke-width="2"/>'
        )
        out.append(f'<text x="{x + 34}" y="{legend_y}" font-size="13">{source}</text>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("ascii")
