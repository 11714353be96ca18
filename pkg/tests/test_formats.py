"""Goto and surfacing-log formats: exact layouts and round trips."""

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from glidernav.formats import (
    FormatError,
    GotoFile,
    Waypoint,
    event_key,
    parse_goto,
    parse_surfacing_log,
    render_goto,
    render_surfacing_record,
)
from glidernav.geo import LatLon, parse_nmea
from glidernav.simulator import SurfacingEvent

TARGET = LatLon(31.3, -(80 + 8.0 / 60))


class TestGoto:
    def test_exact_layout(self):
        data = render_goto([Waypoint(TARGET, 200.0)], "usf-sam", 1677715200.0)
        lines = data.decode().split("\n")
        assert lines[0] == "GENIOS-GOTO 1"
        assert lines[1] == "glider: usf-sam"
        assert lines[2] == "generated: 1677715200"
        assert lines[3] == "num_waypoints: 1"
        assert lines[4] == "wpt -8008.000 3118.000 200"
        assert lines[5] == ""

    def test_two_waypoints_header(self):
        data = render_goto(
            [Waypoint(TARGET, 200.0), Waypoint(LatLon(31.0, -80.0), 150.0)], "g", 0.0
        )
        assert b"num_waypoints: 2" in data

    def test_parse_inverts_render(self):
        wps = [Waypoint(TARGET, 200.0), Waypoint(LatLon(31.16, -80.0), 120.0)]
        data = render_goto(wps, "franklin", 3600.0)
        goto = parse_goto(data)
        assert goto.glider_id == "franklin"
        assert goto.generated == 3600.0
        assert render_goto(goto.waypoints, goto.glider_id, goto.generated) == data

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            render_goto([], "g", 0.0)
        with pytest.raises(ValueError):
            GotoFile(glider_id="g", generated=0.0, waypoints=())

    def test_declared_count_must_match(self):
        data = render_goto([Waypoint(TARGET, 200.0)], "g", 0.0)
        tampered = data.replace(b"num_waypoints: 1", b"num_waypoints: 2")
        with pytest.raises(FormatError):
            parse_goto(tampered)

    @settings(max_examples=100)
    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=-5_399_999, max_value=5_399_999),  # milli-minutes
                st.integers(min_value=-10_799_999, max_value=10_799_999),
                st.integers(min_value=10, max_value=900),
            ),
            min_size=1,
            max_size=6,
        ),
        st.integers(min_value=0, max_value=2**31),
    )
    def test_round_trip_randomized(self, triples, generated):
        # Coordinates on the printable lattice (3-decimal minutes) round-trip
        # exactly through the fixed-width tokens.
        wps = []
        for lat_mm, lon_mm, radius in triples:
            lat = lat_mm / 1000.0 / 60.0
            lon = lon_mm / 1000.0 / 60.0
            wps.append(Waypoint(LatLon(lat, lon), float(radius)))
        data = render_goto(wps, "g1", float(generated))
        parsed = parse_goto(data)
        assert len(parsed.waypoints) == len(wps)
        for got, want in zip(parsed.waypoints, wps):
            assert got.pos.lat == pytest.approx(want.pos.lat, abs=1e-12)
            assert got.pos.lon == pytest.approx(want.pos.lon, abs=1e-12)
            assert got.arrival_radius == want.arrival_radius
        assert render_goto(parsed.waypoints, "g1", float(generated)) == data


def make_event(**kw):
    defaults = dict(
        glider_id="usf-sam",
        t_start=1000.0,
        t_end=4600.0,
        gps_pos=LatLon(31.3, -(80 + 8.0 / 60)),
        deadreckon_pos=LatLon(31.29, -80.14),
    )
    defaults.update(kw)
    return SurfacingEvent(**defaults)


class TestSurfacingLog:
    def test_single_record(self):
        line = render_surfacing_record(make_event())
        events, malformed = parse_surfacing_log((line + "\n").encode())
        assert malformed == 0
        assert len(events) == 1
        ev = events[0]
        assert ev.glider_id == "usf-sam"
        assert ev.t_start == 1000.0 and ev.t_end == 4600.0
        assert ev.gps_pos.lat == pytest.approx(31.3, abs=1e-9)
        assert ev.flow_estimate is not None

    def test_chatter_ignored(self):
        noise = b"behavior surface_3: waiting for GPS\nfix acquired\n$GPGGA,junk\n"
        events, malformed = parse_surfacing_log(noise)
        assert events == [] and malformed == 0

    def test_bad_minutes_counted_malformed(self):
        line = render_surfacing_record(make_event())
        bad = line.replace("gps=3118.0N", "gps=3178.0N")
        events, malformed = parse_surfacing_log((bad + "\n").encode())
        assert events == []
        assert malformed == 1

    def test_torn_trailing_line_ignored(self):
        good = render_surfacing_record(make_event()) + "\n"
        torn = good + "SURF id=usf-sam t0=5000 t1=86"  # write in progress
        events, malformed = parse_surfacing_log(torn.encode())
        assert len(events) == 1
        assert malformed == 0

    def test_mixed_log_preserves_order(self):
        lines = []
        for k in range(3):
            lines.append(render_surfacing_record(make_event(t_start=1000.0 * (k + 1), t_end=1000.0 * (k + 1) + 600)))
            lines.append("unrelated chatter")
        events, _ = parse_surfacing_log(("\n".join(lines) + "\n").encode())
        assert [ev.t_start for ev in events] == [1000.0, 2000.0, 3000.0]

    @settings(max_examples=100)
    @given(
        st.integers(min_value=-5_000_000, max_value=5_000_000),
        st.integers(min_value=-10_000_000, max_value=10_000_000),
        st.integers(min_value=0, max_value=10**9),
        st.integers(min_value=60, max_value=86_400),
    )
    def test_round_trip_randomized(self, lat_um, lon_um, t0, dive_s):
        # Positions on a fine minutes lattice; parse(render(ev)) == ev.
        # Keep the fix/dead-reckon gap physically plausible (< 0.3 m/s).
        from glidernav.geo import LocalVec, from_local

        lat = lat_um / 100_000.0 / 60.0
        lon = lon_um / 100_000.0 / 60.0
        gps = LatLon(lat, lon)
        drift = 0.2 * dive_s
        ev = make_event(
            t_start=float(t0),
            t_end=float(t0 + dive_s),
            gps_pos=gps,
            deadreckon_pos=from_local(LocalVec(drift * 0.6, -drift * 0.4), gps),
        )
        line = render_surfacing_record(ev)
        events, malformed = parse_surfacing_log((line + "\n").encode())
        assert malformed == 0
        got = events[0]
        assert got.glider_id == ev.glider_id
        assert got.t_start == ev.t_start and got.t_end == ev.t_end
        assert got.gps_pos.lat == pytest.approx(ev.gps_pos.lat, abs=1e-9)
        assert got.gps_pos.lon == pytest.approx(ev.gps_pos.lon, abs=1e-9)
        assert got.deadreckon_pos.lat == pytest.approx(ev.deadreckon_pos.lat, abs=1e-9)

    def test_event_key_orders_events(self):
        a = make_event(t_start=0.0, t_end=100.0)
        b = make_event(t_start=150.0, t_end=260.0)
        assert event_key(a) < event_key(b)
