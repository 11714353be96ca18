"""Bit-exact mission file formats: goto files and surfacing logs.

These are the two artifacts that cross the shore boundary.  A goto file
carries the waypoint list uploaded for the glider to execute; a surfacing
log line carries one dive's navigation summary as recorded by the shore
terminal.  Both formats are line-based ASCII with LF endings so they can
be grepped, diffed, and fuzzed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from . import simulator
from .geo import CoordinateError, LatLon, format_nmea, parse_nmea
from .simulator import SurfacingEvent

GOTO_MAGIC = "GENIOS-GOTO 1"
SURF_TAG = "SURF"


class FormatError(ValueError):
    """Unparseable goto file."""


@dataclass(frozen=True)
class Waypoint:
    pos: LatLon
    arrival_radius: float
    eta: float | None = None  # advisory; not serialized

    def __post_init__(self) -> None:
        if self.arrival_radius <= 0:
            raise ValueError("arrival radius must be positive")


@dataclass(frozen=True)
class GotoFile:
    glider_id: str
    generated: float
    waypoints: tuple[Waypoint, ...]
    version: int = 1

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("goto file needs at least one waypoint")


def _num(x: float) -> str:
    """Canonical number text: integers bare, other floats via repr."""
    if float(x) == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def render_goto(waypoints, glider_id: str, t: float) -> bytes:
    """Render waypoints into goto-file bytes.  ``parse_goto`` inverts this."""
    wps = tuple(waypoints)
    if not wps:
        raise ValueError("refusing to render an empty goto file")
    lines = [
        GOTO_MAGIC,
        f"glider: {glider_id}",
        f"generated: {_num(t)}",
        f"num_waypoints: {len(wps)}",
    ]
    for w in wps:
        # Body tokens are bare signed degrees-minutes; the axis is fixed by
        # the column (lon first), so no hemisphere letter is carried.
        lon = format_nmea(w.pos.lon, "lon", 3)[:-1]
        lat = format_nmea(w.pos.lat, "lat", 3)[:-1]
        lines.append(f"wpt {lon} {lat} {_num(w.arrival_radius)}")
    return ("\n".join(lines) + "\n").encode("ascii")


def parse_goto(data: bytes) -> GotoFile:
    lines = data.decode("ascii").split("\n")
    if not lines or lines[0] != GOTO_MAGIC:
        raise FormatError(f"missing goto magic {GOTO_MAGIC!r}")
    try:
        glider_id = _header(lines[1], "glider")
        generated = float(_header(lines[2], "generated"))
        n = int(_header(lines[3], "num_waypoints"))
    except (IndexError, ValueError) as exc:
        raise FormatError(f"bad goto header: {exc}") from exc
    body = [ln for ln in lines[4:] if ln.strip()]
    if len(body) != n:
        raise FormatError(f"declared {n} waypoints but found {len(body)}")
    wps = []
    for ln in body:
        parts = ln.split()
        if len(parts) != 4 or parts[0] != "wpt":
            raise FormatError(f"bad waypoint line {ln!r}")
        try:
            pos = LatLon(
                parse_nmea(parts[2] + "N", "lat"), parse_nmea(parts[1] + "E", "lon")
            )
            radius = float(parts[3])
        except (CoordinateError, ValueError) as exc:
            raise FormatError(f"bad waypoint line {ln!r}: {exc}") from exc
        wps.append(Waypoint(pos, radius))
    return GotoFile(glider_id=glider_id, generated=generated, waypoints=tuple(wps))


def _header(line: str, key: str) -> str:
    prefix = f"{key}: "
    if not line.startswith(prefix):
        raise ValueError(f"expected {prefix!r} line, got {line!r}")
    return line[len(prefix) :]


def render_surfacing_record(ev: SurfacingEvent, mission: str = "default") -> str:
    """One SURF log line for a surfacing event (no trailing newline)."""
    gps = f"{format_nmea(ev.gps_pos.lat, 'lat')},{format_nmea(ev.gps_pos.lon, 'lon')}"
    dr = (
        f"{format_nmea(ev.deadreckon_pos.lat, 'lat')},"
        f"{format_nmea(ev.deadreckon_pos.lon, 'lon')}"
    )
    return (
        f"{SURF_TAG} id={ev.glider_id} t0={_num(ev.t_start)} t1={_num(ev.t_end)} "
        f"gps={gps} dr={dr} mission={mission}"
    )


class ParsedLog(NamedTuple):
    events: list[SurfacingEvent]
    malformed: int


def parse_surfacing_log(data: bytes) -> ParsedLog:
    """Extract SURF records from raw log bytes.

    Tolerant by design: unrelated chatter is skipped silently, malformed
    SURF lines are counted but never fatal, and a partially written trailing
    line (no newline yet) is ignored without error.
    """
    text = data.decode("ascii", errors="replace")
    lines = text.split("\n")
    if not text.endswith("\n") and lines:
        lines = lines[:-1]  # torn trailing write; the next poll will see it
    events: list[SurfacingEvent] = []
    malformed = 0
    for line in lines:
        line = line.strip()
        if not line.startswith(SURF_TAG + " "):
            continue
        try:
            events.append(_parse_surf_line(line))
        except (ValueError, KeyError):
            malformed += 1
    return ParsedLog(events, malformed)


def _parse_surf_line(line: str) -> SurfacingEvent:
    fields: dict[str, str] = {}
    for token in line.split()[1:]:
        key, _, value = token.partition("=")
        if not _:
            raise ValueError(f"field {token!r} has no '='")
        fields[key] = value
    gps_lat, gps_lon = fields["gps"].split(",")
    dr_lat, dr_lon = fields["dr"].split(",")
    ev = SurfacingEvent(
        glider_id=fields["id"],
        t_start=float(fields["t0"]),
        t_end=float(fields["t1"]),
        gps_pos=LatLon(parse_nmea(gps_lat, "lat"), parse_nmea(gps_lon, "lon")),
        deadreckon_pos=LatLon(parse_nmea(dr_lat, "lat"), parse_nmea(dr_lon, "lon")),
    )
    return SurfacingEvent(
        glider_id=ev.glider_id,
        t_start=ev.t_start,
        t_end=ev.t_end,
        gps_pos=ev.gps_pos,
        deadreckon_pos=ev.deadreckon_pos,
        flow_estimate=simulator.estimate_flow(ev),
    )


def event_key(ev: SurfacingEvent) -> tuple[float, float]:
    """Strictly increasing identity for dedup across polls and restarts."""
    return (ev.t_end, ev.t_start)


def goto_name(ev: SurfacingEvent) -> str:
    """Deterministic upload name for the goto answering an event."""
    return f"goto_{int(round(ev.t_end)):012d}.gt"
