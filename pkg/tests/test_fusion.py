"""Model bias correction: residual folding, decay, convergence."""

import math

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from glidernav import flowfield
from glidernav.flowfield import FlowVector
from glidernav.fusion import FusedFlow, FusionState, fused_sample, update_residual
from glidernav.geo import LatLon
from glidernav.simulator import SurfacingEvent

P = LatLon(31.1, -80.2)
HALF_LIFE = 43_200.0


def event(t_start, t_end, estimate, pos=P):
    return SurfacingEvent(
        glider_id="g",
        t_start=t_start,
        t_end=t_end,
        gps_pos=pos,
        deadreckon_pos=pos,
        flow_estimate=estimate,
        start_pos=pos,
    )


class TestUpdateResidual:
    def test_first_update_assigns_residual(self):
        model = flowfield.analytic("uniform", u=0.1, v=0.0)
        state = update_residual(
            FusionState(half_life=HALF_LIFE), event(0, 3600, FlowVector(0.2, 0.0)), model
        )
        assert state.residual_mean.u == pytest.approx(0.1)
        assert state.residual_mean.v == pytest.approx(0.0)
        assert state.n_updates == 1
        assert state.last_update == 3600

    def test_identical_residual_is_fixed_point(self):
        model = flowfield.analytic("uniform", u=0.1, v=0.0)
        s1 = update_residual(
            FusionState(half_life=HALF_LIFE), event(0, 3600, FlowVector(0.2, 0.0)), model
        )
        s2 = update_residual(
            s1, event(3600, 3600 + HALF_LIFE, FlowVector(0.2, 0.0)), model
        )
        assert s2.residual_mean.u == pytest.approx(0.1)
        assert s2.residual_mean.v == pytest.approx(0.0)
        assert s2.n_updates == 2

    def test_estimate_matching_model_contributes_zero(self):
        model = flowfield.analytic("uniform", u=0.1, v=-0.05)
        state = update_residual(
            FusionState(half_life=HALF_LIFE), event(0, 3600, FlowVector(0.1, -0.05)), model
        )
        assert state.residual_mean.speed() == pytest.approx(0.0, abs=1e-15)

    def test_missing_estimate_rejected(self):
        model = flowfield.analytic("uniform", u=0.0, v=0.0)
        with pytest.raises(ValueError):
            update_residual(FusionState(), event(0, 3600, None), model)


class TestFusedSample:
    def test_no_data_is_identity(self):
        model = flowfield.analytic("uniform", u=0.07, v=0.21)
        state = FusionState(half_life=HALF_LIFE)
        raw = model.sample(P, 500.0)
        fused = fused_sample(state, model, P, 500.0)
        assert fused == raw  # bitwise: dataclass equality on identical floats

    def test_zero_decay_at_last_update(self):
        model = flowfield.analytic("uniform", u=0.0, v=0.2)
        state = FusionState(
            residual_mean=FlowVector(0.1, 0.0),
            last_update=1000.0,
            half_life=HALF_LIFE,
            n_updates=1,
        )
        f = fused_sample(state, model, P, 1000.0)
        assert f.u == pytest.approx(0.1)
        assert f.v == pytest.approx(0.2)

    def test_correction_halves_after_half_life(self):
        model = flowfield.analytic("uniform", u=0.0, v=0.2)
        state = FusionState(
            residual_mean=FlowVector(0.1, 0.0),
            last_update=1000.0,
            half_life=HALF_LIFE,
            n_updates=1,
        )
        f = fused_sample(state, model, P, 1000.0 + HALF_LIFE)
        assert f.u == pytest.approx(0.05)
        assert f.v == pytest.approx(0.2)

    def test_no_decay_backwards_in_time(self):
        state = FusionState(
            residual_mean=FlowVector(0.1, 0.0),
            last_update=5000.0,
            half_life=HALF_LIFE,
            n_updates=1,
        )
        model = flowfield.analytic("uniform", u=0.0, v=0.0)
        f = fused_sample(state, model, P, 0.0)
        assert f.u == pytest.approx(0.1)


class TestConvergence:
    def test_constant_bias_converges(self):
        # Model = truth + b.  Residuals are all -b, so the mean must walk
        # monotonically toward -b and be within 25% after five updates.
        truth = FlowVector(0.12, -0.04)
        bias = FlowVector(0.1, 0.05)
        model = flowfield.analytic("uniform", u=truth.u + bias.u, v=truth.v + bias.v)
        state = FusionState(half_life=HALF_LIFE)
        errors = []
        t = 0.0
        for _ in range(8):
            state = update_residual(state, event(t, t + 3600, truth), model)
            err = math.hypot(state.residual_mean.u + bias.u, state.residual_mean.v + bias.v)
            errors.append(err)
            t += 3600
        assert all(b <= a + 1e-15 for a, b in zip(errors, errors[1:]))
        target = math.hypot(bias.u, bias.v)
        assert errors[4] < 0.25 * target

    @settings(max_examples=60)
    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=-0.4, max_value=0.4),
                st.floats(min_value=-0.4, max_value=0.4),
            ),
            min_size=1,
            max_size=12,
        )
    )
    def test_correction_bounded_by_largest_residual(self, residuals):
        # Exponential weighting is a convex combination of the residuals,
        # so the correction can never exceed the largest one seen.
        model = flowfield.analytic("uniform", u=0.0, v=0.0)
        state = FusionState(half_life=HALF_LIFE)
        t = 0.0
        biggest = 0.0
        for u, v in residuals:
            state = update_residual(state, event(t, t + 1800, FlowVector(u, v)), model)
            biggest = max(biggest, math.hypot(u, v))
            t += 1800
        for dt in (0.0, 3600.0, HALF_LIFE):
            f = fused_sample(state, model, P, state.last_update + dt)
            assert math.hypot(f.u, f.v) <= biggest + 1e-12

    def test_zero_history_identity_through_source_view(self):
        model = flowfield.analytic("rotating_tide", amplitude=0.2, period_s=44712.0)
        fused = FusedFlow(FusionState(half_life=HALF_LIFE), model)
        for t in (0.0, 9999.0):
            assert fused.sample(P, t) == model.sample(P, t)

    def test_fused_max_speed_bounds_model_plus_residual(self):
        model = flowfield.analytic("uniform", u=0.1, v=0.0)
        state = FusionState(
            residual_mean=FlowVector(0.05, 0.0), last_update=0.0,
            half_life=HALF_LIFE, n_updates=3,
        )
        fused = FusedFlow(state, model)
        sw, ne = LatLon(30.5, -81.0), LatLon(31.5, -80.0)
        assert fused.max_speed(sw, ne, 0, 3600) == pytest.approx(0.15)
