"""Mission configuration: flat ``section.key = value`` text files.

Every field is validated at load with an error naming the offending key;
nothing silently falls back to a default when a supplied value is out of
range.  Coordinates are written in the same degrees-minutes tokens the
mission files use, and flow sources are one-line specs, e.g.::

    glider.profile = franklin
    deployment.origin = 3100.0N,-8018.0E
    deployment.flow = rotating_tide 0.15 44712 0
    tracking.mode = virtual_mooring
    tracking.targets = 3118.0N,-8008.0E
    dockserver.endpoint = 127.0.0.1:7700

``deployment.flow = grid <path>`` loads a GFLOW file relative to the
config file's directory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import flowfield
from .flowfield import FlowFormatError, FlowSource
from .fusion import DEFAULT_HALF_LIFE_S, FusionState
from .geo import CoordinateError, LatLon, parse_latlon
from .tracking import (
    DEFAULT_ARRIVAL_RADIUS_M,
    DEFAULT_HORIZON_S,
    DEFAULT_PREDICT_DT_S,
    DEFAULT_SPACING_S,
    DEFAULT_STALENESS_S,
)

HORIZONS_S = (43_200.0, 86_400.0)

# Named glider profiles: (speed m/s, glide angle deg, max depth m).  The
# hull numbers are deployment lore, not datasheet values; override freely.
GLIDER_PROFILES = {
    "franklin": (0.28, 26.0, 30.0),
    "usf-sam": (0.25, 26.0, 30.0),
}


class ConfigError(ValueError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"config key {key!r}: {reason}")
        self.key = key


@dataclass
class GliderConfig:
    id: str = "glider"
    speed: float = 0.28
    glide_angle: float = 26.0
    max_depth: float = 30.0
    gps_noise_sigma: float = 5.0


@dataclass
class DeploymentConfig:
    origin: LatLon = LatLon(31.0, -80.3)
    start: LatLon | None = None  # defaults to origin
    shore_bearing: float = 45.0
    flow: str = "uniform 0.0 0.0"
    model_flow: str | None = None  # defaults to the truth flow
    surface_interval: float = 3600.0
    t0: float = 0.0
    duration: float = 5 * 86_400.0
    seed: int = 0


@dataclass
class TrackingSection:
    mode: str = "virtual_mooring"
    targets: list[LatLon] = field(default_factory=list)
    horizon: float = DEFAULT_HORIZON_S
    spacing: float = DEFAULT_SPACING_S
    arrival_radius: float = DEFAULT_ARRIVAL_RADIUS_M
    predict_dt: float = DEFAULT_PREDICT_DT_S
    staleness: float = DEFAULT_STALENESS_S
    transits: int | None = None  # line-control stop condition


@dataclass
class DockserverSection:
    endpoint: str = "127.0.0.1:7700"
    token: str = "token"
    poll_period: float = 10.0

    def host_port(self) -> tuple[str, int]:
        host, _, port = self.endpoint.partition(":")
        return host or "127.0.0.1", int(port)


@dataclass
class FusionSection:
    half_life: float = DEFAULT_HALF_LIFE_S


@dataclass
class PlannerSection:
    bbox_sw: LatLon | None = None
    bbox_ne: LatLon | None = None
    cell: float = 1000.0
    dt_plan: float = 600.0


@dataclass
class MissionConfig:
    glider: GliderConfig
    deployment: DeploymentConfig
    tracking: TrackingSection
    dockserver: DockserverSection
    fusion: FusionSection
    planner: PlannerSection
    base_dir: Path
    raw_text: str

    def start_pos(self) -> LatLon:
        return self.deployment.start or self.deployment.origin

    def fusion_state(self) -> FusionState:
        return FusionState(half_life=self.fusion.half_life)


def config_hash(cfg: MissionConfig) -> str:
    canonical = "\n".join(
        sorted(
            line.strip()
            for line in cfg.raw_text.splitlines()
            if line.strip() and not line.strip().startswith("#")
        )
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _parse_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, eq, value = stripped.partition("=")
        if not eq:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {stripped!r}")
        pairs[key.strip()] = value.strip()
    return pairs


class _Reader:
    def __init__(self, pairs: dict[str, str]):
        self.pairs = dict(pairs)

    def take(self, key: str) -> str | None:
        return self.pairs.pop(key, None)

    def number(self, key: str, default: float, lo=None, hi=None) -> float:
        raw = self.take(key)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(key, f"not a number: {raw!r}") from None
        if lo is not None and value < lo:
            raise ConfigError(key, f"{value} below minimum {lo}")
        if hi is not None and value > hi:
            raise ConfigError(key, f"{value} above maximum {hi}")
        return value

    def integer(self, key: str, default: int | None, lo=None) -> int | None:
        raw = self.take(key)
        if raw is None:
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(key, f"not an integer: {raw!r}") from None
        if lo is not None and value < lo:
            raise ConfigError(key, f"{value} below minimum {lo}")
        return value

    def latlon(self, key: str, default: LatLon | None) -> LatLon | None:
        raw = self.take(key)
        if raw is None:
            return default
        try:
            return parse_latlon(raw)
        except CoordinateError as exc:
            raise ConfigError(key, str(exc)) from None

    def text(self, key: str, default: str | None) -> str | None:
        raw = self.take(key)
        return default if raw is None else raw


def parse_config(text: str, base_dir: str | Path = ".") -> MissionConfig:
    r = _Reader(_parse_pairs(text))
    base = Path(base_dir)

    profile = r.text("glider.profile", None)
    if profile is not None and profile not in GLIDER_PROFILES:
        raise ConfigError(
            "glider.profile", f"unknown profile {profile!r}; choose from {sorted(GLIDER_PROFILES)}"
        )
    speed_default, angle_default, depth_default = GLIDER_PROFILES.get(
        profile or "", (0.28, 26.0, 30.0)
    )
    glider = GliderConfig(
        id=r.text("glider.id", profile or "glider"),
        speed=r.number("glider.speed", speed_default, lo=1e-3, hi=3.0),
        glide_angle=r.number("glider.glide_angle", angle_default, lo=1.0, hi=89.0),
        max_depth=r.number("glider.max_depth", depth_default, lo=1.0),
        gps_noise_sigma=r.number("glider.gps_noise_sigma", 5.0, lo=0.0),
    )

    origin = r.latlon("deployment.origin", DeploymentConfig.origin)
    shore_bearing = r.number("deployment.shore_bearing", 45.0, lo=0.0)
    if shore_bearing >= 360.0:
        raise ConfigError("deployment.shore_bearing", f"{shore_bearing} outside [0, 360)")
    deployment = DeploymentConfig(
        origin=origin,
        start=r.latlon("deployment.start", None),
        shore_bearing=shore_bearing,
        flow=r.text("deployment.flow", "uniform 0.0 0.0"),
        model_flow=r.text("deployment.model_flow", None),
        surface_interval=r.number("deployment.surface_interval", 3600.0, lo=30.0),
        t0=r.number("deployment.t0", 0.0),
        duration=r.number("deployment.duration", 5 * 86_400.0, lo=60.0),
        seed=r.integer("deployment.seed", 0),
    )

    mode = r.text("tracking.mode", "virtual_mooring")
    if mode not in ("virtual_mooring", "line_control"):
        raise ConfigError("tracking.mode", f"unknown mode {mode!r}")
    targets_raw = r.text("tracking.targets", "")
    targets = []
    for part in targets_raw.split(";"):
        part = part.strip()
        if part:
            try:
                targets.append(parse_latlon(part))
            except CoordinateError as exc:
                raise ConfigError("tracking.targets", str(exc)) from None
    if mode == "virtual_mooring" and len(targets) != 1:
        raise ConfigError("tracking.targets", "virtual mooring needs exactly one target")
    if mode == "line_control" and len(targets) < 2:
        raise ConfigError("tracking.targets", "line control needs at least two targets")
    horizon = r.number("tracking.horizon", DEFAULT_HORIZON_S)
    if horizon not in HORIZONS_S:
        raise ConfigError("tracking.horizon", f"{horizon} not one of {HORIZONS_S}")
    tracking = TrackingSection(
        mode=mode,
        targets=targets,
        horizon=horizon,
        spacing=r.number("tracking.spacing", DEFAULT_SPACING_S, lo=60.0),
        arrival_radius=r.number("tracking.arrival_radius", DEFAULT_ARRIVAL_RADIUS_M, lo=1.0),
        predict_dt=r.number("tracking.predict_dt", DEFAULT_PREDICT_DT_S, lo=1.0, hi=300.0),
        staleness=r.number("tracking.staleness", DEFAULT_STALENESS_S, lo=1.0),
        transits=r.integer("tracking.transits", None, lo=1),
    )

    endpoint = r.text("dockserver.endpoint", DockserverSection.endpoint)
    host, _, port = endpoint.partition(":")
    if not port or not port.isdigit():
        raise ConfigError("dockserver.endpoint", f"expected host:port, got {endpoint!r}")
    dock = DockserverSection(
        endpoint=endpoint,
        token=r.text("dockserver.token", "token"),
        poll_period=r.number("dockserver.poll_period", 10.0, lo=0.1),
    )

    fusion = FusionSection(half_life=r.number("fusion.half_life", DEFAULT_HALF_LIFE_S, lo=60.0))

    planner = PlannerSection(
        bbox_sw=r.latlon("planner.bbox_sw", None),
        bbox_ne=r.latlon("planner.bbox_ne", None),
        cell=r.number("planner.cell", 1000.0, lo=10.0),
        dt_plan=r.number("planner.dt_plan", 600.0, lo=1.0),
    )

    if r.pairs:
        unknown = sorted(r.pairs)[0]
        raise ConfigError(unknown, "unknown config key")

    cfg = MissionConfig(
        glider=glider,
        deployment=deployment,
        tracking=tracking,
        dockserver=dock,
        fusion=fusion,
        planner=planner,
        base_dir=base,
        raw_text=text,
    )
    # Fail now if a referenced flow file is missing or a spec is malformed.
    make_flow_source(cfg.deployment.flow, base, key="deployment.flow")
    if cfg.deployment.model_flow is not None:
        make_flow_source(cfg.deployment.model_flow, base, key="deployment.model_flow")
    return cfg


def load_config(path: str | Path) -> MissionConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(str(path), "config file does not exist")
    return parse_config(p.read_text(), base_dir=p.parent)


def make_flow_source(spec: str, base_dir: str | Path = ".", key: str = "flow") -> FlowSource:
    """Build a flow source from a one-line spec."""
    words = spec.split()
    if not words:
        raise ConfigError(key, "empty flow spec")
    kind, args = words[0], words[1:]
    try:
        if kind == "uniform":
            return flowfield.analytic("uniform", u=float(args[0]), v=float(args[1]))
        if kind == "rotating_tide":
            return flowfield.analytic(
                "rotating_tide",
                amplitude=float(args[0]),
                period_s=float(args[1]),
                phase_rad=float(args[2]) if len(args) > 2 else 0.0,
            )
        if kind == "gyre":
            return flowfield.analytic(
                "gyre",
                center_lat=float(args[0]),
                center_lon=float(args[1]),
                omega_rad_s=float(args[2]),
                r_max_m=float(args[3]),
            )
        if kind == "grid":
            path = Path(base_dir) / args[0]
            if not path.is_file():
                raise ConfigError(key, f"flow grid file {path} does not exist")
            return flowfield.GridFlow(flowfield.load_grid(path.read_bytes()))
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(key, f"bad flow spec {spec!r}: {exc}") from None
    raise ConfigError(key, f"unknown flow kind {kind!r}")


# --------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    config_hash: str
    poll_state: dict
    fusion: dict
    tracker: dict

    def dump(self) -> bytes:
        return json.dumps(
            {
                "config_hash": self.config_hash,
                "poll_state": self.poll_state,
                "fusion": self.fusion,
                "tracker": self.tracker,
            },
            indent=2,
            sort_keys=True,
        ).encode("ascii")

    @classmethod
    def load(cls, data: bytes) -> "Checkpoint":
        d = json.loads(data.decode("ascii"))
        return cls(
            config_hash=d["config_hash"],
            poll_state=d["poll_state"],
            fusion=d["fusion"],
            tracker=d["tracker"],
        )


def fusion_to_dict(state: FusionState) -> dict:
    return {
        "residual_u": state.residual_mean.u,
        "residual_v": state.residual_mean.v,
        "last_update": state.last_update,
        "half_life": state.half_life,
        "n_updates": state.n_updates,
    }


def fusion_from_dict(d: dict) -> FusionState:
    from .flowfield import FlowVector

    return FusionState(
        residual_mean=FlowVector(d["residual_u"], d["residual_v"]),
        last_update=d["last_update"],
        half_life=d["half_life"],
        n_updates=d["n_updates"],
    )
