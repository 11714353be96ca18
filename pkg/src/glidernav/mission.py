"""Mission orchestration: the simulated closed loop and the remote pilot.

Simulated mode closes the loop in-process: fly a dive through the truth
flow, estimate flow from the surfacing, fold the residual into the fusion
state, plan against the corrected model, and point the next dive at the
first waypoint.  Runs are deterministic per (config, seed) down to the
bytes of every emitted artifact.

Remote mode wires the same planning callback into the dockserver polling
loop and checkpoints after every processed event, so a restarted pilot
continues the goto sequence exactly where it stopped.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .clocks import SystemClock
from .config import (
    Checkpoint,
    ConfigError,
    MissionConfig,
    config_hash,
    fusion_from_dict,
    fusion_to_dict,
    make_flow_source,
)
from .dockserver import DockserverClient, PilotLoop, PollState
from .flowfield import FlowDomainError
from .formats import GotoFile, render_goto, render_surfacing_record
from .fusion import FusedFlow, update_residual
from .geo import distance_m, to_local
from .simulator import AT_SURFACE, DiveParams, GliderState, run_dive
from .tracking import (
    LineControl,
    PathTracker,
    TrackerConfig,
    VirtualMooring,
    flow_cancel_heading,
)

ARRIVED = "arrived"
TRANSITS_DONE = "transits_done"
DURATION_ELAPSED = "duration_elapsed"
ABORTED = "aborted"


@dataclass
class MissionReport:
    outcome: str
    dives: int
    transits: int
    final_distance_m: float
    events: list
    gotos: list[bytes]
    track: list[tuple[float, float, float, float]]  # (t, lat, lon, depth)
    index_history: list[int]
    surfacing_distances: list[float] = field(default_factory=list)

    def trajectory_csv(self) -> bytes:
        lines = ["t,lat,lon,depth"]
        lines.extend(f"{t!r},{lat!r},{lon!r},{d!r}" for t, lat, lon, d in self.track)
        return ("\n".join(lines) + "\n").encode("ascii")

    def event_log(self) -> bytes:
        lines = [render_surfacing_record(ev) for ev in self.events]
        return ("\n".join(lines) + "\n").encode("ascii") if lines else b""

    def summary(self) -> str:
        return (
            f"outcome={self.outcome} dives={self.dives} transits={self.transits} "
            f"final_distance_m={self.final_distance_m:.1f}"
        )


def _build_tracker(cfg: MissionConfig) -> PathTracker:
    t = cfg.tracking
    if t.mode == "virtual_mooring":
        mode = VirtualMooring(target=t.targets[0])
    else:
        mode = LineControl(targets=list(t.targets))
    return PathTracker(
        mode=mode,
        cfg=TrackerConfig(
            speed=cfg.glider.speed,
            horizon=t.horizon,
            spacing=t.spacing,
            arrival_radius=t.arrival_radius,
            predict_dt=t.predict_dt,
            staleness=t.staleness,
        ),
    )


def run_sim(cfg: MissionConfig, seed: int | None = None) -> MissionReport:
    """Closed-loop simulated mission; deterministic per (config, seed)."""
    truth = make_flow_source(cfg.deployment.flow, cfg.base_dir)
    model = (
        make_flow_source(cfg.deployment.model_flow, cfg.base_dir)
        if cfg.deployment.model_flow
        else truth
    )
    fusion = cfg.fusion_state()
    tracker = _build_tracker(cfg)
    params = DiveParams(
        max_depth=cfg.glider.max_depth,
        glide_angle=cfg.glider.glide_angle,
        surface_interval=cfg.deployment.surface_interval,
        gps_noise_sigma=cfg.glider.gps_noise_sigma,
    )
    state = GliderState(
        pos=cfg.start_pos(),
        speed_thru_water=cfg.glider.speed,
        clock=cfg.deployment.t0,
        phase=AT_SURFACE,
    )
    master = random.Random(cfg.deployment.seed if seed is None else seed)
    t_stop = cfg.deployment.t0 + cfg.deployment.duration

    events: list = []
    gotos: list[bytes] = []
    track: list[tuple[float, float, float, float]] = []
    surf_dist: list[float] = []
    index_history = [tracker.mode.index] if isinstance(tracker.mode, LineControl) else []
    outcome = DURATION_ELAPSED
    next_target = tracker.mode.current_target()

    while state.clock < t_stop:
        fused = FusedFlow(fusion, model)
        f_here = fused.sample(state.pos, state.clock, clamp=True)
        if distance_m(state.pos, next_target) < 1.0:
            heading = state.heading  # sitting on the target; hold heading
        else:
            heading, _ = flow_cancel_heading(
                state.pos, next_target, f_here, cfg.glider.speed
            )
        try:
            state, ev = run_dive(
                state,
                heading,
                truth,
                params,
                rng_seed=master.getrandbits(32),
                glider_id=cfg.glider.id,
                track_out=track,
            )
        except FlowDomainError:
            outcome = ABORTED
            break
        events.append(ev)
        surf_dist.append(distance_m(ev.gps_pos, _mission_target(tracker)))
        if ev.aborted:
            outcome = ABORTED
            break
        fusion = update_residual(fusion, ev, model)
        goto = tracker.plan(ev, FusedFlow(fusion, model))
        gotos.append(render_goto(goto.waypoints, goto.glider_id, goto.generated))
        if isinstance(tracker.mode, LineControl):
            index_history.append(tracker.mode.index)
        if tracker.mission_complete:
            outcome = ARRIVED
            break
        if (
            isinstance(tracker.mode, LineControl)
            and cfg.tracking.transits is not None
            and tracker.transits >= cfg.tracking.transits
        ):
            outcome = TRANSITS_DONE
            break
        next_target = goto.waypoints[0].pos

    final_target = _mission_target(tracker)
    return MissionReport(
        outcome=outcome,
        dives=len(events),
        transits=tracker.transits,
        final_distance_m=distance_m(state.pos, final_target),
        events=events,
        gotos=gotos,
        track=track,
        index_history=index_history,
        surfacing_distances=surf_dist,
    )


def _mission_target(tracker: PathTracker):
    if isinstance(tracker.mode, VirtualMooring):
        return tracker.mode.target
    return tracker.mode.current_target()


@dataclass
class RemotePilot:
    """Pilot loop wiring for a live (or mock) dockserver deployment."""

    cfg: MissionConfig
    checkpoint_path: Path | None = None
    clock: object = None
    alerts: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.clock = self.clock or SystemClock()
        self.model = (
            make_flow_source(self.cfg.deployment.model_flow, self.cfg.base_dir)
            if self.cfg.deployment.model_flow
            else make_flow_source(self.cfg.deployment.flow, self.cfg.base_dir)
        )
        self.fusion = self.cfg.fusion_state()
        self.tracker = _build_tracker(self.cfg)
        self.poll_state = PollState()
        self.hash = config_hash(self.cfg)
        if self.checkpoint_path is not None and self.checkpoint_path.exists():
            self._restore(Checkpoint.load(self.checkpoint_path.read_bytes()))
        host, port = self.cfg.dockserver.host_port()
        self.client = DockserverClient(host, port, self.cfg.dockserver.token)
        self.loop = PilotLoop(
            self.client,
            [self.cfg.glider.id],
            self._plan_event,
            clock=self.clock,
            poll_period=self.cfg.dockserver.poll_period,
            state=self.poll_state,
            on_event=self._checkpoint,
            alert=self.alerts.append,
        )

    def _restore(self, ck: Checkpoint) -> None:
        if ck.config_hash != self.hash:
            raise ConfigError(
                "checkpoint", "config hash mismatch; refusing a mixed-config resume"
            )
        self.poll_state = PollState.from_dict(ck.poll_state)
        self.fusion = fusion_from_dict(ck.fusion)
        self.tracker.restore(ck.tracker)

    def _plan_event(self, ev) -> bytes:
        self.fusion = update_residual(self.fusion, ev, self.model)
        goto: GotoFile = self.tracker.plan(
            ev, FusedFlow(self.fusion, self.model), now=self.clock.now()
        )
        return render_goto(goto.waypoints, goto.glider_id, goto.generated)

    def _checkpoint(self, ev) -> None:
        if self.checkpoint_path is None:
            return
        ck = Checkpoint(
            config_hash=self.hash,
            poll_state=self.loop.state.to_dict(),
            fusion=fusion_to_dict(self.fusion),
            tracker=self.tracker.state_dict(),
        )
        tmp = self.checkpoint_path.with_suffix(".tmp")
        tmp.write_bytes(ck.dump())
        tmp.replace(self.checkpoint_path)

    def run(self, max_polls: int | None = None) -> None:
        self.loop.run(max_polls=max_polls)

    def stop(self) -> None:
        self.loop.stop()


def run_remote(
    cfg: MissionConfig,
    checkpoint_path: str | Path | None = None,
    clock=None,
    max_polls: int | None = None,
) -> RemotePilot:
    """Run the pilot loop against the configured dockserver endpoint."""
    pilot = RemotePilot(
        cfg,
        checkpoint_path=Path(checkpoint_path) if checkpoint_path else None,
        clock=clock,
    )
    pilot.run(max_polls=max_polls)
    return pilot


def cross_track_extent(
    track: list[tuple[float, float, float, float]], start, target
) -> float:
    """Largest off-line distance of a ground track from the start-target line."""
    base = to_local(target, start)
    length = base.norm()
    if length == 0:
        return 0.0
    ex, ey = base.east / length, base.north / length
    worst = 0.0
    from .geo import LatLon

    for _, lat, lon, _ in track:
        v = to_local(LatLon(lat, lon), start)
        cross = abs(v.east * ey - v.north * ex)
        worst = max(worst, cross)
    return worst
