"""Coordinate handling for glider navigation.

Positions are decimal degrees internally.  At every file/wire boundary they
appear as NMEA-style degrees-minutes tokens (``DDMM.M`` plus hemisphere
letter, sign allowed on the whole token, e.g. ``3118.0N`` or ``-8008.0E``).
Longitudes keep the signed-E convention rather than switching to W.

Local motion is integrated on an equirectangular tangent plane around a
declared origin; at deployment scales (tens of km) the projection error is
well under 0.1%, which keeps the kinematics linear and hand-checkable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEGREE = EARTH_RADIUS_M * math.pi / 180.0

_NMEA_RE = re.compile(r"^([+-]?)(\d+)\.(\d+)([NSEW])$")


class CoordinateError(ValueError):
    """Malformed or out-of-range coordinate."""


@dataclass(frozen=True)
class LatLon:
    """Geodetic position in decimal degrees (north, east positive)."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise CoordinateError(f"non-finite position ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise CoordinateError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise CoordinateError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class LocalVec:
    """Tangent-plane offset from a declared origin, meters east/north."""

    east: float
    north: float

    def __add__(self, other: "LocalVec") -> "LocalVec":
        return LocalVec(self.east + other.east, self.north + other.north)

    def __sub__(self, other: "LocalVec") -> "LocalVec":
        return LocalVec(self.east - other.east, self.north - other.north)

    def scaled(self, k: float) -> "LocalVec":
        return LocalVec(self.east * k, self.north * k)

    def norm(self) -> float:
        return math.hypot(self.east, self.north)


def parse_nmea(token: str, axis: str) -> float:
    """Parse one degrees-minutes token into decimal degrees.

    ``axis`` is ``"lat"`` or ``"lon"`` and must agree with the hemisphere
    letter.  The value is ``whole_degrees + minutes/60``, signed by both the
    hemisphere letter and any explicit leading sign.
    """
    if axis not in ("lat", "lon"):
        raise ValueError(f"axis must be 'lat' or 'lon', got {axis!r}")
    m = _NMEA_RE.match(token.strip())
    if m is None:
        raise CoordinateError(f"malformed coordinate token {token!r}")
    sign_ch, whole, frac, hemi = m.groups()
    if axis == "lat" and hemi not in "NS":
        raise CoordinateError(f"latitude token {token!r} must end in N or S")
    if axis == "lon" and hemi not in "EW":
        raise CoordinateError(f"longitude token {token!r} must end in E or W")
    if len(whole) < 3:
        # Need at least one degree digit in front of the two minute digits.
        whole = whole.zfill(3)
    degrees = float(whole[:-2])
    minutes = float(whole[-2:] + "." + frac)
    if minutes >= 60.0:
        raise CoordinateError(f"minutes {minutes} >= 60 in token {token!r}")
    value = degrees + minutes / 60.0
    if sign_ch == "-":
        value = -value
    if hemi in "SW":
        value = -value
    limit = 90.0 if axis == "lat" else 180.0
    if abs(value) > limit:
        raise CoordinateError(f"token {token!r} parses outside +-{limit} degrees")
    return value


def format_nmea(value: float, axis: str, minute_decimals: int | None = None) -> str:
    """Format decimal degrees as a degrees-minutes token.

    With ``minute_decimals=None`` the minutes carry as many decimals as the
    value needs (at least one), so ``parse_nmea`` inverts the result to well
    under 1e-6 degrees.  Pass an explicit count for fixed-width file formats.
    """
    if axis not in ("lat", "lon"):
        raise ValueError(f"axis must be 'lat' or 'lon', got {axis!r}")
    limit = 90.0 if axis == "lat" else 180.0
    if not math.isfinite(value) or abs(value) > limit:
        raise CoordinateError(f"{axis} value {value} outside +-{limit}")
    hemi = "N" if axis == "lat" else "E"
    sign = "-" if value < 0 else ""
    mag = abs(value)
    degrees = int(mag)
    minutes = (mag - degrees) * 60.0
    if minute_decimals is None:
        text = f"{minutes:.9f}".rstrip("0")
        if text.endswith("."):
            text += "0"
    else:
        text = f"{minutes:.{minute_decimals}f}"
    # Rounding may push the minutes to 60.0; carry into the degrees.
    if float(text) >= 60.0:
        degrees += 1
        zeros = minute_decimals if minute_decimals is not None else 1
        text = f"{0.0:.{zeros}f}"
    whole, frac = text.split(".")
    return f"{sign}{degrees:02d}{int(whole):02d}.{frac}{hemi}"


def parse_latlon(text: str) -> LatLon:
    """Parse a ``<latNMEA>,<lonNMEA>`` pair, e.g. ``3118.0N,-8008.0E``."""
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 2:
        raise CoordinateError(f"expected 'lat,lon' pair, got {text!r}")
    return LatLon(parse_nmea(parts[0], "lat"), parse_nmea(parts[1], "lon"))


def format_latlon(p: LatLon, minute_decimals: int | None = None) -> str:
    return (
        f"{format_nmea(p.lat, 'lat', minute_decimals)},"
        f"{format_nmea(p.lon, 'lon', minute_decimals)}"
    )


_MAX_PLANE_RANGE_M = 500_000.0


def to_local(p: LatLon, origin: LatLon) -> LocalVec:
    """Project ``p`` onto the tangent plane at ``origin`` (meters east/north)."""
    north = (p.lat - origin.lat) * METERS_PER_DEGREE
    east = (p.lon - origin.lon) * METERS_PER_DEGREE * math.cos(math.radians(origin.lat))
    v = LocalVec(east, north)
    if v.norm() > _MAX_PLANE_RANGE_M:
        raise CoordinateError(
            f"position {v.norm() / 1000.0:.0f} km from origin; tangent plane "
            f"is only trusted within {_MAX_PLANE_RANGE_M / 1000.0:.0f} km"
        )
    return v


def from_local(v: LocalVec, origin: LatLon) -> LatLon:
    """Exact inverse of :func:`to_local` for the same origin."""
    if v.norm() > _MAX_PLANE_RANGE_M:
        raise CoordinateError("local offset outside trusted tangent-plane range")
    lat = origin.lat + v.north / METERS_PER_DEGREE
    lon = origin.lon + v.east / (METERS_PER_DEGREE * math.cos(math.radians(origin.lat)))
    return LatLon(lat, lon)


def distance_m(a: LatLon, b: LatLon) -> float:
    """Tangent-plane distance, anchored at ``a``."""
    return to_local(b, a).norm()


def bearing_deg(a: LatLon, b: LatLon) -> float:
    """Compass bearing from ``a`` to ``b``, degrees clockwise from true north."""
    v = to_local(b, a)
    if v.east == 0.0 and v.north == 0.0:
        raise CoordinateError("bearing undefined for coincident positions")
    return math.degrees(math.atan2(v.east, v.north)) % 360.0


def decompose_shore(u: float, v: float, shore_bearing: float) -> tuple[float, float]:
    """Split an (east, north) vector into alongshore/crossshore components.

    ``shore_bearing`` is the shoreline axis in degrees clockwise from north.
    Magnitude is preserved: along**2 + cross**2 == u**2 + v**2.
    """
    if not 0.0 <= shore_bearing < 360.0:
        raise ValueError(f"shore bearing {shore_bearing} outside [0, 360)")
    theta = math.radians(shore_bearing)
    along = u * math.sin(theta) + v * math.cos(theta)
    cross = u * math.cos(theta) - v * math.sin(theta)
    return along, cross
