"""Waypoint tracking: flow-cancelling heading control and trajectory prediction.

The controller picks the heading whose through-water velocity cancels the
cross-track component of the ambient flow, so the ground velocity points
straight at the target whenever the flow leaves that feasible.  When the
cross flow exceeds the glider's speed the offset saturates at +-90 degrees
(maximum cancellation, zero commanded progress) and the step is flagged
flow-dominated rather than letting the glider chase a target it cannot
hold.

Prediction integrates that control law forward 12 or 24 hours with the
glider as a kinematic particle, and waypoints are read off the predicted
track at a fixed spacing.  Two tracking modes: virtual mooring (hold one
target) and line control (shuttle along an ordered target list).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .flowfield import FlowDomainError, FlowSource, FlowVector
from .formats import GotoFile, Waypoint
from .geo import LatLon, LocalVec, bearing_deg, distance_m, from_local

FEASIBLE = "feasible"
FLOW_DOMINATED = "flow_dominated"

DEFAULT_ARRIVAL_RADIUS_M = 200.0
DEFAULT_HORIZON_S = 43_200.0
DEFAULT_SPACING_S = 14_400.0
DEFAULT_PREDICT_DT_S = 60.0
DEFAULT_STALENESS_S = 1800.0


class StaleEventError(ValueError):
    """Surfacing event too old to plan from."""


@dataclass
class VirtualMooring:
    target: LatLon
    complete: bool = False

    def current_target(self) -> LatLon:
        return self.target

    def on_arrival(self) -> None:
        self.complete = True


@dataclass
class LineControl:
    targets: list[LatLon]
    index: int = 0
    direction: int = 1
    complete: bool = False  # line control never completes on its own

    def __post_init__(self) -> None:
        if len(self.targets) < 2:
            raise ValueError("line control needs at least two targets")
        if not 0 <= self.index < len(self.targets):
            raise ValueError("line control index outside target list")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")

    def current_target(self) -> LatLon:
        return self.targets[self.index]

    def on_arrival(self) -> None:
        nxt = self.index + self.direction
        if not 0 <= nxt < len(self.targets):
            self.direction = -self.direction
            nxt = self.index + self.direction
        self.index = nxt


TrackingMode = VirtualMooring | LineControl


@dataclass
class Trajectory:
    samples: list[tuple[float, LatLon]]
    feasible_fraction: float
    truncated: bool = False  # flow domain ended before the horizon


def flow_cancel_heading(
    p: LatLon, target: LatLon, flow: FlowVector, speed: float
) -> tuple[float, str]:
    """Heading that cancels the cross-track flow toward ``target``.

    Returns (compass degrees, status).  Feasible means the resulting ground
    velocity lies on the bearing line; flow_dominated means the cross flow
    exceeds ``speed`` and the offset saturates at +-90 degrees.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    bearing = bearing_deg(p, target)  # raises on p == target
    b = math.radians(bearing)
    # Cross-track flow, positive to the right of the bearing line.
    f_cross = flow.u * math.cos(b) - flow.v * math.sin(b)
    if abs(f_cross) <= speed:
        delta = -math.degrees(math.asin(f_cross / speed))
        return (bearing + delta) % 360.0, FEASIBLE
    delta = -90.0 if f_cross > 0 else 90.0
    return (bearing + delta) % 360.0, FLOW_DOMINATED


def _ground_velocity(
    p: LatLon, target: LatLon, flow: FlowVector, speed: float
) -> tuple[float, float, str]:
    heading, status = flow_cancel_heading(p, target, flow, speed)
    h = math.radians(heading)
    return speed * math.sin(h) + flow.u, speed * math.cos(h) + flow.v, status


def predict_trajectory(
    p0: LatLon,
    t0: float,
    mode: TrackingMode,
    flow: FlowSource,
    speed: float,
    horizon: float = DEFAULT_HORIZON_S,
    dt: float = DEFAULT_PREDICT_DT_S,
    arrival_radius: float = DEFAULT_ARRIVAL_RADIUS_M,
) -> Trajectory:
    """Forward-Euler rollout of the flow-cancel law against the mode's targets.

    Virtual mooring stops at arrival; line control keeps shuttling for the
    whole horizon.  Leaving the flow domain truncates the trajectory and
    flags it.  The caller's mode object is not mutated.
    """
    if dt <= 0 or dt > 300:
        raise ValueError(f"prediction step {dt} outside (0, 300] s")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    mode = replace(mode)  # private copy: in-prediction arrivals ping-pong freely
    samples = [(t0, p0)]
    p, t = p0, t0
    feasible = 0
    steps = 0
    truncated = False
    done = False
    while t - t0 < horizon and not done:
        target = mode.current_target()
        dist = distance_m(p, target)
        arrivals = 0
        while dist <= arrival_radius:
            mode.on_arrival()
            arrivals += 1
            if isinstance(mode, VirtualMooring) or arrivals > 2 * _n_targets(mode):
                done = True  # held at the mooring, or every target is in radius
                break
            target = mode.current_target()
            dist = distance_m(p, target)
        if done:
            break
        try:
            f = flow.sample(p, t)
        except FlowDomainError:
            truncated = True
            break
        ve, vn, status = _ground_velocity(p, target, f, speed)
        steps += 1
        if status == FEASIBLE:
            feasible += 1
        ground = math.hypot(ve, vn)
        step_dt = min(dt, horizon - (t - t0))
        if ground > 0 and ground * step_dt >= dist:
            # Would cross the target this step: land on it at the exact time.
            t += dist / ground
            p = target
            samples.append((t, p))
            continue
        p = from_local(LocalVec(ve * step_dt, vn * step_dt), p)
        t += step_dt
        samples.append((t, p))
    frac = feasible / steps if steps else 1.0
    return Trajectory(samples=samples, feasible_fraction=frac, truncated=truncated)


def _n_targets(mode: TrackingMode) -> int:
    return len(mode.targets) if isinstance(mode, LineControl) else 1


def extract_waypoints(
    traj: Trajectory, spacing: float, arrival_radius: float = DEFAULT_ARRIVAL_RADIUS_M
) -> list[Waypoint]:
    """Read waypoints off a predicted trajectory at ``spacing`` seconds.

    Takes the first sample at or past each multiple of the spacing plus the
    final sample, then merges consecutive picks closer than the arrival
    radius (keeping the later one, so the list always ends on the
    trajectory's end point).
    """
    if spacing <= 0:
        raise ValueError("waypoint spacing must be positive")
    if not traj.samples:
        raise ValueError("cannot extract waypoints from an empty trajectory")
    t0 = traj.samples[0][0]
    picks: list[tuple[float, LatLon]] = []
    k = 1
    for t, p in traj.samples:
        if t >= t0 + k * spacing:
            picks.append((t, p))
            k += 1
    last = traj.samples[-1]
    if not picks or picks[-1][0] != last[0]:
        picks.append(last)
    merged: list[tuple[float, LatLon]] = []
    for t, p in picks:
        if merged and distance_m(merged[-1][1], p) < arrival_radius:
            merged[-1] = (t, p)
        else:
            merged.append((t, p))
    return [Waypoint(pos=p, arrival_radius=arrival_radius, eta=t) for t, p in merged]


@dataclass
class TrackerConfig:
    speed: float
    horizon: float = DEFAULT_HORIZON_S
    spacing: float = DEFAULT_SPACING_S
    arrival_radius: float = DEFAULT_ARRIVAL_RADIUS_M
    predict_dt: float = DEFAULT_PREDICT_DT_S
    staleness: float = DEFAULT_STALENESS_S


@dataclass
class PathTracker:
    """Per-mission tracking state: mode progress persists across plans."""

    mode: TrackingMode
    cfg: TrackerConfig
    transits: int = 0
    index_history: list[int] = field(default_factory=list)
    last_feasible_fraction: float = 1.0

    def plan(self, ev, flow: FlowSource, now: float | None = None) -> GotoFile:
        """Plan from a surfacing event and render the resulting goto file.

        Arrival is judged on the event's GPS fix before predicting, which is
        where line-control legs advance and virtual moorings complete.
        """
        if now is not None and now - ev.t_end > self.cfg.staleness:
            raise StaleEventError(
                f"event ended {now - ev.t_end:.0f} s ago, past the "
                f"{self.cfg.staleness:.0f} s staleness bound"
            )
        target = self.mode.current_target()
        if distance_m(ev.gps_pos, target) <= self.cfg.arrival_radius:
            self.mode.on_arrival()
            if isinstance(self.mode, LineControl):
                self.transits += 1
                self.index_history.append(self.mode.index)
        if isinstance(self.mode, VirtualMooring) and self.mode.complete:
            wps = [Waypoint(self.mode.target, self.cfg.arrival_radius, eta=ev.t_end)]
            return GotoFile(
                glider_id=ev.glider_id, generated=ev.t_end, waypoints=tuple(wps)
            )
        traj = predict_trajectory(
            ev.gps_pos,
            ev.t_end,
            self.mode,
            flow,
            self.cfg.speed,
            horizon=self.cfg.horizon,
            dt=self.cfg.predict_dt,
            arrival_radius=self.cfg.arrival_radius,
        )
        self.last_feasible_fraction = traj.feasible_fraction
        wps = extract_waypoints(traj, self.cfg.spacing, self.cfg.arrival_radius)
        return GotoFile(
            glider_id=ev.glider_id, generated=ev.t_end, waypoints=tuple(wps)
        )

    @property
    def mission_complete(self) -> bool:
        return isinstance(self.mode, VirtualMooring) and self.mode.complete

    def state_dict(self) -> dict:
        if isinstance(self.mode, VirtualMooring):
            mode = {"kind": "virtual_mooring", "complete": self.mode.complete}
        else:
            mode = {
                "kind": "line_control",
                "index": self.mode.index,
                "direction": self.mode.direction,
            }
        return {"mode": mode, "transits": self.transits}

    def restore(self, state: dict) -> None:
        mode = state["mode"]
        if isinstance(self.mode, VirtualMooring):
            if mode["kind"] != "virtual_mooring":
                raise ValueError("checkpoint tracking mode does not match config")
            self.mode.complete = bool(mode["complete"])
        else:
            if mode["kind"] != "line_control":
                raise ValueError("checkpoint tracking mode does not match config")
            self.mode.index = int(mode["index"])
            self.mode.direction = int(mode["direction"])
        self.transits = int(state["transits"])
