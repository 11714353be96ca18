"""Deterministic glider flight simulator.

The glider is a kinematic particle: constant horizontal speed through the
water, fixed glide angle, instantaneous heading changes, ground velocity =
through-water velocity + ambient flow.  Depth follows a sawtooth between
the surface and max depth.  GPS exists only at the surface; between fixes
the only navigation product is the dead-reckoned track, and the mismatch
between fix and dead reckoning over a dive yields the glider's own
depth-averaged flow estimate.

Each dive is integrated on a single tangent plane so that constant-flow
runs recover the flow estimate to machine precision; this is what makes
the simulator usable as an oracle for the controller and fusion layers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from .flowfield import FlowDomainError, FlowSource, FlowVector
from .geo import LatLon, LocalVec, from_local, to_local

AT_SURFACE = "at_surface"
DIVING = "diving"

INTERNAL_DT_S = 10.0


@dataclass(frozen=True)
class GliderState:
    pos: LatLon
    depth: float = 0.0
    heading: float = 0.0
    speed_thru_water: float = 0.28
    clock: float = 0.0
    phase: str = AT_SURFACE
    descending: bool = True

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError(f"depth {self.depth} below surface")
        if self.speed_thru_water <= 0:
            raise ValueError("speed through water must be positive")
        if not 0.0 <= self.heading < 360.0:
            object.__setattr__(self, "heading", self.heading % 360.0)


@dataclass(frozen=True)
class DiveParams:
    max_depth: float = 30.0
    glide_angle: float = 26.0
    surface_interval: float = 3600.0  # commanded underwater duration
    gps_noise_sigma: float = 5.0

    def __post_init__(self) -> None:
        if not 0.0 < self.glide_angle < 90.0:
            raise ValueError(f"glide angle {self.glide_angle} outside (0, 90)")
        if self.surface_interval <= 0:
            raise ValueError("surface interval must be positive")
        if self.max_depth <= 0:
            raise ValueError("max depth must be positive")
        if self.gps_noise_sigma < 0:
            raise ValueError("gps noise sigma cannot be negative")


@dataclass(frozen=True)
class SurfacingEvent:
    """One dive's worth of navigation truth as seen from shore."""

    glider_id: str
    t_start: float
    t_end: float
    gps_pos: LatLon
    deadreckon_pos: LatLon
    flow_estimate: FlowVector | None = None
    waypoint_active: object | None = None
    start_pos: LatLon | None = None
    aborted: bool = False

    def __post_init__(self) -> None:
        if self.t_end <= self.t_start:
            raise ValueError("dive must end after it starts")


def heading_unit(heading_deg: float) -> tuple[float, float]:
    """(east, north) unit vector for a compass heading."""
    h = math.radians(heading_deg)
    return math.sin(h), math.cos(h)


def _fold_depth(depth: float, descending: bool, travel: float, max_depth: float) -> tuple[float, bool]:
    """Advance a sawtooth by ``travel`` meters, reflecting at 0 and max_depth.

    Folding conserves total vertical distance exactly across reflections.
    """
    z = depth if descending else 2.0 * max_depth - depth
    z = (z + travel) % (2.0 * max_depth)
    if z <= max_depth:
        return z, True
    return 2.0 * max_depth - z, False


def step(
    s: GliderState,
    heading_cmd: float,
    flow: FlowSource,
    dt: float,
    max_depth: float = 30.0,
    glide_angle: float = 26.0,
) -> GliderState:
    """One forward-Euler step of the kinematic model."""
    if dt < 0:
        raise ValueError("dt cannot be negative")
    if dt == 0:
        return s
    he, hn = heading_unit(heading_cmd)
    f = flow.sample(s.pos, s.clock)
    ve = s.speed_thru_water * he + f.u
    vn = s.speed_thru_water * hn + f.v
    pos = from_local(LocalVec(ve * dt, vn * dt), s.pos)
    vertical = s.speed_thru_water * math.tan(math.radians(glide_angle)) * dt
    depth, descending = _fold_depth(s.depth, s.descending, vertical, max_depth)
    return replace(
        s,
        pos=pos,
        depth=depth,
        heading=heading_cmd % 360.0,
        clock=s.clock + dt,
        phase=DIVING,
        descending=descending,
    )


def run_dive(
    s: GliderState,
    heading_cmd: float,
    flow: FlowSource,
    params: DiveParams,
    rng_seed: int,
    glider_id: str = "glider",
    waypoint_active: object | None = None,
    track_out: list | None = None,
) -> tuple[GliderState, SurfacingEvent]:
    """Fly one dive and surface with a GPS fix and a flow estimate.

    The dive is integrated in the tangent plane of its start position, and
    the fix is anchored at the dead-reckon endpoint so that
    :func:`estimate_flow` inverts the projection exactly.  Deterministic for
    a given seed.  If the flow domain ends mid-dive the dive aborts at the
    boundary and the event is flagged.
    """
    if s.phase != AT_SURFACE:
        raise ValueError("dives start from the surface")
    start = s.pos
    t_start = s.clock
    he, hn = heading_unit(heading_cmd)
    spd = s.speed_thru_water
    vz = spd * math.tan(math.radians(params.glide_angle))

    p = LocalVec(0.0, 0.0)  # truth offset from start, meters
    depth = 0.0
    descending = True
    elapsed = 0.0
    aborted = False
    if track_out is not None:
        track_out.append((t_start, start.lat, start.lon, 0.0))
    while elapsed < params.surface_interval:
        dt = min(INTERNAL_DT_S, params.surface_interval - elapsed)
        here = from_local(p, start)
        try:
            f = flow.sample(here, t_start + elapsed)
        except FlowDomainError:
            aborted = True
            break
        p = LocalVec(p.east + (spd * he + f.u) * dt, p.north + (spd * hn + f.v) * dt)
        depth, descending = _fold_depth(depth, descending, vz * dt, params.max_depth)
        elapsed += dt
        if track_out is not None:
            here = from_local(p, start)
            track_out.append((t_start + elapsed, here.lat, here.lon, depth))
    if elapsed <= 0.0:
        raise FlowDomainError(f"flow undefined at dive start {start} t={t_start}")

    dr = LocalVec(spd * he * elapsed, spd * hn * elapsed)
    deadreckon_pos = from_local(dr, start)
    rng = random.Random(rng_seed)
    noise_e = rng.gauss(0.0, params.gps_noise_sigma)
    noise_n = rng.gauss(0.0, params.gps_noise_sigma)
    # Express the fix as an offset from the dead-reckon endpoint, in that
    # endpoint's own frame: estimate_flow then recovers (truth - dr + noise)
    # without picking up projection curvature.
    gps_pos = from_local(p - dr + LocalVec(noise_e, noise_n), deadreckon_pos)
    t_end = t_start + elapsed
    ev = SurfacingEvent(
        glider_id=glider_id,
        t_start=t_start,
        t_end=t_end,
        gps_pos=gps_pos,
        deadreckon_pos=deadreckon_pos,
        waypoint_active=waypoint_active,
        start_pos=start,
        aborted=aborted,
    )
    ev = replace(ev, flow_estimate=estimate_flow(ev))
    new_state = replace(
        s,
        pos=gps_pos,
        depth=0.0,
        heading=heading_cmd % 360.0,
        clock=t_end,
        phase=AT_SURFACE,
        descending=True,
    )
    return new_state, ev


def estimate_flow(ev: SurfacingEvent) -> FlowVector:
    """Depth-averaged flow from the fix / dead-reckoning mismatch."""
    duration = ev.t_end - ev.t_start
    if duration <= 0:
        raise ValueError("zero-duration dive has no flow estimate")
    offset = to_local(ev.gps_pos, ev.deadreckon_pos)
    return FlowVector(offset.east / duration, offset.north / duration)
