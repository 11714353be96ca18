"""Bias correction of model flow from glider-derived estimates.

Each surfacing yields one depth-and-time-averaged flow measurement.  The
residual against the model prediction at the dive midpoint is folded into
an exponentially weighted mean, and the correction decays with the same
half-life when no fresh measurements arrive.  With no data the corrected
source is bitwise identical to the raw model; under a constant model bias
the correction converges to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .flowfield import FlowSource, FlowVector
from .geo import LatLon

DEFAULT_HALF_LIFE_S = 43_200.0


@dataclass(frozen=True)
class FusionState:
    residual_mean: FlowVector = FlowVector(0.0, 0.0)
    last_update: float = 0.0
    half_life: float = DEFAULT_HALF_LIFE_S
    n_updates: int = 0

    def __post_init__(self) -> None:
        if not (self.half_life > 0 and math.isfinite(self.half_life)):
            raise ValueError(f"half_life must be positive, got {self.half_life}")
        if self.n_updates < 0:
            raise ValueError("n_updates cannot be negative")


def _dive_midpoint(ev) -> tuple[LatLon, float]:
    t_mid = 0.5 * (ev.t_start + ev.t_end)
    start = ev.start_pos if ev.start_pos is not None else ev.gps_pos
    p_mid = LatLon(
        0.5 * (start.lat + ev.gps_pos.lat), 0.5 * (start.lon + ev.gps_pos.lon)
    )
    return p_mid, t_mid


def update_residual(state: FusionState, ev, model: FlowSource) -> FusionState:
    """Fold one surfacing event's residual into the state.

    The glider estimate is a whole-dive average, so the model is read at the
    dive's spatial and temporal midpoint.  Weighting: the previous mean keeps
    weight ``2**(-dt/half_life)`` for the time elapsed since the last update.
    """
    if ev.flow_estimate is None:
        raise ValueError("surfacing event carries no flow estimate")
    p_mid, t_mid = _dive_midpoint(ev)
    predicted = model.sample(p_mid, t_mid, clamp=True)
    r_u = ev.flow_estimate.u - predicted.u
    r_v = ev.flow_estimate.v - predicted.v
    if state.n_updates == 0:
        mean = FlowVector(r_u, r_v)
    else:
        lam = 2.0 ** (-(ev.t_end - state.last_update) / state.half_life)
        mean = FlowVector(
            lam * state.residual_mean.u + (1.0 - lam) * r_u,
            lam * state.residual_mean.v + (1.0 - lam) * r_v,
        )
    return FusionState(
        residual_mean=mean,
        last_update=ev.t_end,
        half_life=state.half_life,
        n_updates=state.n_updates + 1,
    )


def fused_sample(
    state: FusionState, model: FlowSource, p: LatLon, t: float, clamp: bool = False
) -> FlowVector:
    """Model sample plus the time-decayed residual correction."""
    raw = model.sample(p, t, clamp=clamp)
    if state.n_updates == 0:
        return raw
    decay = 2.0 ** (-max(0.0, t - state.last_update) / state.half_life)
    return FlowVector(
        raw.u + state.residual_mean.u * decay, raw.v + state.residual_mean.v * decay
    )


class FusedFlow(FlowSource):
    """A FlowSource view over (model, fusion state) snapshots.

    The state is captured at construction; concurrent sampling is safe
    because neither part mutates afterwards.
    """

    def __init__(self, state: FusionState, model: FlowSource):
        self.state = state
        self.model = model

    def sample(self, p: LatLon, t: float, clamp: bool = False) -> FlowVector:
        return fused_sample(self.state, self.model, p, t, clamp=clamp)

    def max_speed(self, sw: LatLon, ne: LatLon, t0: float, t1: float) -> float:
        bound = self.model.max_speed(sw, ne, t0, t1)
        if self.state.n_updates:
            bound += self.state.residual_mean.speed()
        return bound
