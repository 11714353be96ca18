"""Dive simulator: kinematics, sawtooth depth, flow estimation oracle."""

import math

import pytest

from glidernav import flowfield, simulator
from glidernav.flowfield import FlowDomainError
from glidernav.geo import LatLon, to_local
from glidernav.simulator import (
    AT_SURFACE,
    DiveParams,
    GliderState,
    SurfacingEvent,
    estimate_flow,
    run_dive,
    step,
)

START = LatLon(31.0, -80.3)


def surfaced(speed=0.3, clock=0.0):
    return GliderState(pos=START, speed_thru_water=speed, clock=clock, phase=AT_SURFACE)


def quiet_params(**kw):
    defaults = dict(max_depth=30.0, glide_angle=26.0, surface_interval=3600.0,
                    gps_noise_sigma=0.0)
    defaults.update(kw)
    return DiveParams(**defaults)


class TestStep:
    def test_northward_kinematics(self):
        still = flowfield.analytic("uniform", u=0.0, v=0.0)
        s1 = step(surfaced(), 0.0, still, 1000.0)
        off = to_local(s1.pos, START)
        assert off.north == pytest.approx(300.0, abs=1e-6)
        assert off.east == pytest.approx(0.0, abs=1e-6)
        assert s1.clock == 1000.0

    def test_flow_adds_to_ground_velocity(self):
        flow = flowfield.analytic("uniform", u=0.1, v=0.0)
        s1 = step(surfaced(), 0.0, flow, 1000.0)
        off = to_local(s1.pos, START)
        assert off.east == pytest.approx(100.0, abs=1e-3)
        assert off.north == pytest.approx(300.0, abs=1e-3)

    def test_zero_dt_is_identity(self):
        still = flowfield.analytic("uniform", u=0.0, v=0.0)
        s = surfaced()
        assert step(s, 0.0, still, 0.0) is s

    def test_depth_reflects_at_bottom(self):
        still = flowfield.analytic("uniform", u=0.0, v=0.0)
        s = surfaced()
        rate = 0.3 * math.tan(math.radians(26.0))
        # Long enough to hit max depth and come partway back up.
        t_cross = 30.0 / rate
        s1 = step(s, 0.0, still, t_cross + 100.0, max_depth=30.0, glide_angle=26.0)
        assert s1.depth == pytest.approx(30.0 - rate * 100.0)
        assert not s1.descending


class TestRunDive:
    def test_uniform_flow_recovered_exactly(self):
        flow = flowfield.analytic("uniform", u=0.1, v=-0.05)
        state, ev = run_dive(surfaced(), 37.0, flow, quiet_params(), rng_seed=1)
        assert ev.flow_estimate.u == pytest.approx(0.1, abs=1e-9)
        assert ev.flow_estimate.v == pytest.approx(-0.05, abs=1e-9)

    def test_zero_flow_zero_estimate(self):
        still = flowfield.analytic("uniform", u=0.0, v=0.0)
        state, ev = run_dive(surfaced(), 123.0, still, quiet_params(), rng_seed=2)
        assert ev.flow_estimate.speed() == pytest.approx(0.0, abs=1e-12)
        assert ev.gps_pos == ev.deadreckon_pos

    def test_commanded_duration_honored(self):
        still = flowfield.analytic("uniform", u=0.0, v=0.0)
        _, ev = run_dive(
            surfaced(), 0.0, still, quiet_params(surface_interval=60.0), rng_seed=3
        )
        assert ev.t_end - ev.t_start == pytest.approx(60.0)

    def test_determinism_bit_identical(self):
        flow = flowfield.analytic("uniform", u=0.05, v=0.02)
        params = quiet_params(gps_noise_sigma=5.0)
        a = run_dive(surfaced(), 77.0, flow, params, rng_seed=42)
        b = run_dive(surfaced(), 77.0, flow, params, rng_seed=42)
        assert a == b
        c = run_dive(surfaced(), 77.0, flow, params, rng_seed=43)
        assert c[1].gps_pos != a[1].gps_pos

    def test_requires_surface_start(self):
        still = flowfield.analytic("uniform", u=0.0, v=0.0)
        diving = GliderState(pos=START, depth=10.0, phase="diving", speed_thru_water=0.3)
        with pytest.raises(ValueError):
            run_dive(diving, 0.0, still, quiet_params(), rng_seed=1)

    def test_domain_exit_aborts_flagged(self):
        # Grid covers a sliver around the start; heading north exits it.
        grid = flowfield.grid_from_source(
            flowfield.analytic("uniform", u=0.0, v=0.0),
            LatLon(30.99, -80.35),
            LatLon(31.01, -80.25),
            nx=3, ny=3, t0=0.0, dt=36000.0, nt=2,
        )
        src = flowfield.GridFlow(grid)
        state, ev = run_dive(
            surfaced(), 0.0, src, quiet_params(surface_interval=36000.0), rng_seed=1
        )
        assert ev.aborted
        assert ev.t_end - ev.t_start < 36000.0

    def test_sawtooth_matches_triangle_wave(self):
        # Independent oracle: constant-rate triangle wave between 0 and
        # max_depth.  Matching it at every sample time implies the total
        # vertical distance is rate * duration.
        still = flowfield.analytic("uniform", u=0.0, v=0.0)
        params = quiet_params(surface_interval=7200.0)
        track: list = []
        run_dive(surfaced(), 0.0, still, params, rng_seed=1, track_out=track)
        rate = 0.3 * math.tan(math.radians(26.0))

        def triangle(t):
            z = (rate * t) % 60.0
            return z if z <= 30.0 else 60.0 - z

        for t, _, _, depth in track:
            assert depth == pytest.approx(triangle(t), abs=1e-9)

    def test_ground_track_is_deadreckon_plus_flow_integral(self):
        # Independent quadrature of the flow along the truth track must
        # explain the fix/dead-reckon gap to < 1 m/h for a smooth field.
        flow = flowfield.analytic("rotating_tide", amplitude=0.12, period_s=44712.0)
        track: list = []
        state, ev = run_dive(
            surfaced(), 25.0, flow, quiet_params(), rng_seed=9, track_out=track
        )
        integral_e = integral_n = 0.0
        for (t0, lat0, lon0, _), (t1, _, _, _) in zip(track, track[1:]):
            f = flow.sample(LatLon(lat0, lon0), t0)
            integral_e += f.u * (t1 - t0)
            integral_n += f.v * (t1 - t0)
        gap = to_local(ev.gps_pos, ev.deadreckon_pos)
        assert gap.east == pytest.approx(integral_e, abs=1.0)
        assert gap.north == pytest.approx(integral_n, abs=1.0)


class TestEstimateFlow:
    def make_event(self, offset_east, offset_north, duration):
        from glidernav.geo import LocalVec, from_local

        dr = LatLon(31.05, -80.2)
        gps = from_local(LocalVec(offset_east, offset_north), dr)
        return SurfacingEvent(
            glider_id="g", t_start=0.0, t_end=duration, gps_pos=gps, deadreckon_pos=dr
        )

    def test_eastward_offset(self):
        ev = self.make_event(360.0, 0.0, 3600.0)
        f = estimate_flow(ev)
        assert f.u == pytest.approx(0.1, abs=1e-12)
        assert f.v == pytest.approx(0.0, abs=1e-12)

    def test_coincident_positions(self):
        ev = self.make_event(0.0, 0.0, 3600.0)
        assert estimate_flow(ev).speed() == 0.0

    def test_southward_offset(self):
        ev = self.make_event(0.0, -180.0, 3600.0)
        f = estimate_flow(ev)
        assert f.v == pytest.approx(-0.05, abs=1e-12)

    def test_zero_duration_rejected(self):
        with pytest.raises(ValueError):
            SurfacingEvent(
                glider_id="g", t_start=5.0, t_end=5.0,
                gps_pos=START, deadreckon_pos=START,
            )
