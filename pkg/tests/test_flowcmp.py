"""Flow comparison table, strong-flow alerts, CSV/SVG emission."""

import math

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from glidernav import flowcmp, flowfield
from glidernav.flowcmp import (
    FORWARD_EXTENSION_S,
    ComparisonTable,
    TableRow,
    build_table,
    detect_strong_flow,
    emit_csv,
    emit_svg,
    parse_csv,
)
from glidernav.flowfield import FlowVector
from glidernav.fusion import FusionState, update_residual
from glidernav.geo import LatLon
from glidernav.simulator import SurfacingEvent

POS = LatLon(31.1, -80.2)


def event(t_start, t_end, estimate, pos=POS):
    return SurfacingEvent(
        glider_id="g", t_start=t_start, t_end=t_end, gps_pos=pos,
        deadreckon_pos=pos, flow_estimate=estimate, start_pos=pos,
    )


def three_events():
    return [
        event(0.0, 3600.0, FlowVector(0.1, 0.0)),
        event(3600.0, 7200.0, FlowVector(0.12, 0.02)),
        event(7200.0, 10_800.0, FlowVector(0.08, -0.01)),
    ]


class TestBuildTable:
    def test_lattice_extends_exactly_twelve_hours(self):
        model = flowfield.analytic("uniform", u=0.1, v=0.0)
        table = build_table(three_events(), model, FusionState(), 45.0, lattice_dt=600.0)
        model_ts = [r.t for r in table.by_source(flowcmp.MODEL)]
        fused_ts = [r.t for r in table.by_source(flowcmp.FUSED)]
        assert max(model_ts) == 10_800.0 + FORWARD_EXTENSION_S
        assert max(fused_ts) == 10_800.0 + FORWARD_EXTENSION_S
        assert model_ts == fused_ts

    def test_glider_rows_at_mid_dive_times(self):
        model = flowfield.analytic("uniform", u=0.0, v=0.0)
        table = build_table(three_events(), model, FusionState(), 45.0)
        ts = [r.t for r in table.by_source(flowcmp.GLIDER)]
        assert ts == [1800.0, 5400.0, 9000.0]

    def test_zero_history_fused_equals_model(self):
        model = flowfield.analytic("rotating_tide", amplitude=0.2, period_s=44712.0)
        table = build_table(three_events(), model, FusionState(), 45.0)
        for m, f in zip(table.by_source(flowcmp.MODEL), table.by_source(flowcmp.FUSED)):
            assert m.t == f.t
            assert m.u == f.u and m.v == f.v

    def test_decomposition_consistent(self):
        ev = event(0.0, 3600.0, FlowVector(0.1, 0.0))
        model = flowfield.analytic("uniform", u=0.0, v=0.0)
        table = build_table([ev], model, FusionState(), 90.0)
        glider = table.by_source(flowcmp.GLIDER)[0]
        assert glider.along == pytest.approx(0.1)
        assert abs(glider.cross) < 1e-12
        for row in table.rows:
            assert abs(row.along**2 + row.cross**2 - (row.u**2 + row.v**2)) < 1e-12

    def test_fused_rows_decay_after_deployment(self):
        truth = FlowVector(0.1, 0.0)
        model = flowfield.analytic("uniform", u=0.3, v=0.0)  # 0.2 bias
        fusion = FusionState(half_life=43_200.0)
        events = three_events()
        for ev in events:
            fusion = update_residual(fusion, ev, model)
        table = build_table(events, model, fusion, 45.0, lattice_dt=3600.0)
        fused = {r.t: r for r in table.by_source(flowcmp.FUSED)}
        at_end = fused[10_800.0]
        half_later = fused[10_800.0 + 43_200.0]
        correction_end = at_end.u - 0.3
        correction_half = half_later.u - 0.3
        assert correction_half == pytest.approx(correction_end / 2, rel=1e-9)

    def test_empty_events_rejected(self):
        model = flowfield.analytic("uniform", u=0.0, v=0.0)
        with pytest.raises(ValueError):
            build_table([], model, FusionState(), 45.0)


def synthetic_table(est_speed, fused_speed, t=1800.0):
    rows = [
        TableRow(t=t, source=flowcmp.GLIDER, u=est_speed, v=0.0, along=est_speed, cross=0.0),
        TableRow(t=t, source=flowcmp.MODEL, u=0.1, v=0.0, along=0.1, cross=0.0),
        TableRow(t=t, source=flowcmp.FUSED, u=fused_speed, v=0.0, along=fused_speed, cross=0.0),
    ]
    return ComparisonTable(rows=rows, last_event_t=t)


class TestStrongFlow:
    def test_both_above_threshold_alerts(self):
        alerts = detect_strong_flow(synthetic_table(0.35, 0.32), threshold=0.3)
        assert len(alerts) == 1
        assert alerts[0].glider_speed == pytest.approx(0.35)
        assert alerts[0].fused_speed == pytest.approx(0.32)
        assert alerts[0].model_speed == pytest.approx(0.1)

    def test_conjunction_requires_both(self):
        assert detect_strong_flow(synthetic_table(0.35, 0.25), threshold=0.3) == []
        assert detect_strong_flow(synthetic_table(0.25, 0.35), threshold=0.3) == []

    def test_all_zero_no_alerts(self):
        assert detect_strong_flow(synthetic_table(0.0, 0.0)) == []

    @settings(max_examples=150)
    @given(
        st.floats(min_value=0.0, max_value=0.6),
        st.floats(min_value=0.0, max_value=0.6),
    )
    def test_conjunction_property(self, est, fused):
        alerts = detect_strong_flow(synthetic_table(est, fused), threshold=0.3)
        should_fire = est > 0.3 and fused > 0.3
        assert bool(alerts) == should_fire


class TestEmission:
    def test_single_row_csv(self):
        table = ComparisonTable(
            rows=[TableRow(0.0, flowcmp.GLIDER, 0.1, 0.0, 0.1, 0.0)], last_event_t=0.0
        )
        lines = emit_csv(table).decode().strip().split("\n")
        assert len(lines) == 2
        assert lines[0] == "t,source,u,v,along,cross"

    def test_csv_round_trip_exact(self):
        model = flowfield.analytic("rotating_tide", amplitude=0.21, period_s=44712.0)
        table = build_table(three_events(), model, FusionState(), 37.5)
        back = parse_csv(emit_csv(table))
        assert back.rows == table.rows

    def test_svg_has_dashed_rule_and_fused_crossing(self):
        model = flowfield.analytic("uniform", u=0.1, v=0.05)
        table = build_table(three_events(), model, FusionState(), 45.0)
        svg = emit_svg(table).decode()
        assert "stroke-dasharray" in svg
        assert 'data-source="fused"' in svg
        # The fused polyline must extend past the dashed rule's x position.
        rule_x = float(svg.split("stroke-dasharray")[0].rsplit('x1="', 1)[1].split('"')[0])
        fused_part = svg.split('data-source="fused"')[1]
        points = fused_part.split('points="')[1].split('"')[0]
        last_x = float(points.split()[-1].split(",")[0])
        assert last_x > rule_x

    def test_empty_table_rejected(self):
        with pytest.raises(ValueError):
            emit_csv(ComparisonTable(rows=[]))
        with pytest.raises(ValueError):
            emit_svg(ComparisonTable(rows=[]))
