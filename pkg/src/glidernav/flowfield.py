"""Time-varying depth-averaged flow sources.

One interface covers three kinds of source: analytic test fields (uniform,
rotating tide, solid-body gyre), regular gridded files standing in for an
external circulation model feed, and the bias-corrected hybrid built on top
of them (see :mod:`glidernav.fusion`).  All sources are immutable after
construction, so the planner and the pilot loop may sample them from
different threads.

Out-of-domain queries raise :class:`FlowDomainError` unless the caller
explicitly opts into clamping; silent extrapolation is how gliders drift
off into unplanned water.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import LatLon, to_local

MAX_REASONABLE_SPEED = 5.0  # m/s; faster samples are treated as data errors

GFLOW_MAGIC = "GFLOW 1"


class FlowDomainError(ValueError):
    """Query outside a flow source's space-time domain."""


class FlowFormatError(ValueError):
    """Unreadable or inconsistent gridded flow file."""


@dataclass(frozen=True)
class FlowVector:
    """Depth-averaged current, meters/second east (u) and north (v)."""

    u: float
    v: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError(f"non-finite flow ({self.u}, {self.v})")
        if self.speed() >= MAX_REASONABLE_SPEED:
            raise ValueError(
                f"flow speed {self.speed():.2f} m/s exceeds the "
                f"{MAX_REASONABLE_SPEED} m/s sanity bound"
            )

    def speed(self) -> float:
        return math.hypot(self.u, self.v)


class FlowSource:
    """Common interface: sample a flow vector at a position and time."""

    def sample(self, p: LatLon, t: float, clamp: bool = False) -> FlowVector:
        raise NotImplementedError

    def max_speed(self, sw: LatLon, ne: LatLon, t0: float, t1: float) -> float:
        """Upper bound on |flow| over the box and time window.

        Must never under-report: the planner heuristic divides by
        ``speed + max_speed`` and stays admissible only if this bounds the
        true supremum.
        """
        raise NotImplementedError


class UniformFlow(FlowSource):
    def __init__(self, u: float, v: float):
        self.vector = FlowVector(u, v)

    def sample(self, p: LatLon, t: float, clamp: bool = False) -> FlowVector:
        return self.vector

    def max_speed(self, sw: LatLon, ne: LatLon, t0: float, t1: float) -> float:
        _check_window(t0, t1)
        return self.vector.speed()


class RotatingTideFlow(FlowSource):
    """Flow vector of constant magnitude rotating with the tidal period."""

    def __init__(self, amplitude: float, period_s: float, phase_rad: float = 0.0):
        if not (math.isfinite(amplitude) and 0.0 <= amplitude < MAX_REASONABLE_SPEED):
            raise ValueError(f"bad tide amplitude {amplitude}")
        if not (math.isfinite(period_s) and period_s > 0):
            raise ValueError(f"tide period must be positive, got {period_s}")
        if not math.isfinite(phase_rad):
            raise ValueError(f"bad tide phase {phase_rad}")
        self.amplitude = amplitude
        self.period_s = period_s
        self.phase_rad = phase_rad

    def sample(self, p: LatLon, t: float, clamp: bool = False) -> FlowVector:
        a = 2.0 * math.pi * t / self.period_s + self.phase_rad
        return FlowVector(self.amplitude * math.cos(a), self.amplitude * math.sin(a))

    def max_speed(self, sw: LatLon, ne: LatLon, t0: float, t1: float) -> float:
        _check_window(t0, t1)
        return self.amplitude


class GyreFlow(FlowSource):
    """Solid-body rotation about a center, tangential speed capped at r_max."""

    def __init__(self, center: LatLon, omega_rad_s: float, r_max_m: float):
        if not math.isfinite(omega_rad_s):
            raise ValueError(f"bad gyre rate {omega_rad_s}")
        if not (math.isfinite(r_max_m) and r_max_m > 0):
            raise ValueError(f"gyre cap radius must be positive, got {r_max_m}")
        if abs(omega_rad_s) * r_max_m >= MAX_REASONABLE_SPEED:
            raise ValueError("gyre rim speed exceeds the sanity bound")
        self.center = center
        self.omega = omega_rad_s
        self.r_max = r_max_m

    def sample(self, p: LatLon, t: float, clamp: bool = False) -> FlowVector:
        r = to_local(p, self.center)
        dist = r.norm()
        if dist == 0.0:
            return FlowVector(0.0, 0.0)
        # omega x r, with the radius capped so the rim speed saturates.
        scale = self.omega * min(dist, self.r_max) / dist
        return FlowVector(-r.north * scale, r.east * scale)

    def max_speed(self, sw: LatLon, ne: LatLon, t0: float, t1: float) -> float:
        _check_window(t0, t1)
        corners = [sw, ne, LatLon(sw.lat, ne.lon), LatLon(ne.lat, sw.lon)]
        reach = max(to_local(c, self.center).norm() for c in corners)
        return abs(self.omega) * min(reach, self.r_max)


def analytic(kind: str, **params: float) -> FlowSource:
    """Build an analytic flow source: uniform | rotating_tide | gyre."""
    if kind == "uniform":
        return UniformFlow(params["u"], params["v"])
    if kind == "rotating_tide":
        return RotatingTideFlow(
            params["amplitude"], params["period_s"], params.get("phase_rad", 0.0)
        )
    if kind == "gyre":
        return GyreFlow(
            LatLon(params["center_lat"], params["center_lon"]),
            params["omega_rad_s"],
            params["r_max_m"],
        )
    raise ValueError(f"unknown analytic flow kind {kind!r}")


@dataclass(frozen=True)
class FlowGrid:
    """Regular lon/lat/time grid of flow samples (node-registered)."""

    origin: LatLon  # south-west node
    dlat: float
    dlon: float
    ny: int
    nx: int
    t0: float
    dt: float
    nt: int
    u: np.ndarray  # shape (nt, ny, nx)
    v: np.ndarray

    def __post_init__(self) -> None:
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs nx, ny >= 2, got {self.nx}x{self.ny}")
        if self.nt < 1:
            raise ValueError(f"grid needs nt >= 1, got {self.nt}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"grid dt must be positive, got {self.dt}")
        if not (self.dlat > 0 and self.dlon > 0):
            raise ValueError("grid spacing must be positive")
        shape = (self.nt, self.ny, self.nx)
        if self.u.shape != shape or self.v.shape != shape:
            raise ValueError(f"grid arrays must have shape {shape}")
        if not (np.isfinite(self.u).all() and np.isfinite(self.v).all()):
            raise ValueError("grid contains non-finite samples")
        speed = np.hypot(self.u, self.v)
        if (speed >= MAX_REASONABLE_SPEED).any():
            raise ValueError(
                f"grid contains samples above the {MAX_REASONABLE_SPEED} m/s bound"
            )


class GridFlow(FlowSource):
    """Bilinear-in-space, linear-in-time interpolation over a FlowGrid."""

    def __init__(self, grid: FlowGrid):
        self.grid = grid

    def _fractional(self, value: float, n: int, what: str, clamp: bool) -> tuple[int, float]:
        if value < 0.0 or value > n - 1:
            if not clamp:
                raise FlowDomainError(f"{what} index {value:.3f} outside [0, {n - 1}]")
            value = min(max(value, 0.0), float(n - 1))
        i = int(value)
        if i >= n - 1:  # exactly on the upper edge
            return n - 2, 1.0
        return i, value - i

    def sample(self, p: LatLon, t: float, clamp: bool = False) -> FlowVector:
        g = self.grid
        fx = (p.lon - g.origin.lon) / g.dlon
        fy = (p.lat - g.origin.lat) / g.dlat
        ix, wx = self._fractional(fx, g.nx, "lon", clamp)
        iy, wy = self._fractional(fy, g.ny, "lat", clamp)
        if g.nt == 1:
            if t != g.t0 and not clamp:
                raise FlowDomainError(f"time {t} outside single-frame grid at {g.t0}")
            it, wt = 0, 0.0
            u_t = g.u[0]
            v_t = g.v[0]
            return _bilinear(u_t, v_t, ix, iy, wx, wy)
        ft = (t - g.t0) / g.dt
        it, wt = self._fractional(ft, g.nt, "time", clamp)
        f0 = _bilinear(g.u[it], g.v[it], ix, iy, wx, wy)
        if wt == 0.0:
            return f0
        f1 = _bilinear(g.u[it + 1], g.v[it + 1], ix, iy, wx, wy)
        return FlowVector(f0.u + wt * (f1.u - f0.u), f0.v + wt * (f1.v - f0.v))

    def max_speed(self, sw: LatLon, ne: LatLon, t0: float, t1: float) -> float:
        _check_window(t0, t1)
        g = self.grid
        # Nodes of every cell overlapping the box: bilinear values are convex
        # combinations of these, so their max bounds the interpolated field.
        x0 = _clamp_index(math.floor((sw.lon - g.origin.lon) / g.dlon), g.nx)
        x1 = _clamp_index(math.ceil((ne.lon - g.origin.lon) / g.dlon), g.nx)
        y0 = _clamp_index(math.floor((sw.lat - g.origin.lat) / g.dlat), g.ny)
        y1 = _clamp_index(math.ceil((ne.lat - g.origin.lat) / g.dlat), g.ny)
        if g.nt == 1:
            k0, k1 = 0, 0
        else:
            k0 = _clamp_index(math.floor((t0 - g.t0) / g.dt), g.nt)
            k1 = _clamp_index(math.ceil((t1 - g.t0) / g.dt), g.nt)
        u = g.u[k0 : k1 + 1, y0 : y1 + 1, x0 : x1 + 1]
        v = g.v[k0 : k1 + 1, y0 : y1 + 1, x0 : x1 + 1]
        return float(np.hypot(u, v).max())


def _bilinear(u: np.ndarray, v: np.ndarray, ix: int, iy: int, wx: float, wy: float) -> FlowVector:
    w00 = (1 - wx) * (1 - wy)
    w10 = wx * (1 - wy)
    w01 = (1 - wx) * wy
    w11 = wx * wy
    uu = (
        w00 * u[iy, ix]
        + w10 * u[iy, ix + 1]
        + w01 * u[iy + 1, ix]
        + w11 * u[iy + 1, ix + 1]
    )
    vv = (
        w00 * v[iy, ix]
        + w10 * v[iy, ix + 1]
        + w01 * v[iy + 1, ix]
        + w11 * v[iy + 1, ix + 1]
    )
    return FlowVector(float(uu), float(vv))


def _clamp_index(i: float, n: int) -> int:
    return int(min(max(i, 0), n - 1))


def _check_window(t0: float, t1: float) -> None:
    if t1 < t0:
        raise ValueError(f"empty time window [{t0}, {t1}]")


def _fmt(x: float) -> str:
    """Exact text for header floats: ints stay ints, floats use repr."""
    if float(x) == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def save_grid(grid: FlowGrid) -> bytes:
    """Serialize a grid to the GFLOW text format (LF endings, bit-stable)."""
    lines = [
        GFLOW_MAGIC,
        f"origin {_fmt(grid.origin.lat)} {_fmt(grid.origin.lon)} "
        f"dlat {_fmt(grid.dlat)} dlon {_fmt(grid.dlon)} ny {grid.ny} nx {grid.nx}",
        f"t0 {_fmt(grid.t0)} dt {_fmt(grid.dt)} nt {grid.nt}",
    ]
    for k in range(grid.nt):
        for j in range(grid.ny):
            for i in range(grid.nx):
                lines.append(f"{grid.u[k, j, i]:.6g} {grid.v[k, j, i]:.6g}")
    return ("\n".join(lines) + "\n").encode("ascii")


def load_grid(data: bytes) -> FlowGrid:
    """Parse GFLOW bytes; inverse of :func:`save_grid` on its own output."""
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FlowFormatError(f"not a text GFLOW file: {exc}") from exc
    lines = text.split("\n")
    if not lines or lines[0].strip() != GFLOW_MAGIC:
        raise FlowFormatError(f"missing magic {GFLOW_MAGIC!r}")
    if len(lines) < 3:
        raise FlowFormatError("truncated header")
    try:
        h1 = lines[1].split()
        if [h1[0], h1[3], h1[5], h1[7], h1[9]] != ["origin", "dlat", "dlon", "ny", "nx"]:
            raise FlowFormatError(f"bad grid header line {lines[1]!r}")
        origin = LatLon(float(h1[1]), float(h1[2]))
        dlat, dlon = float(h1[4]), float(h1[6])
        ny, nx = int(h1[8]), int(h1[10])
        h2 = lines[2].split()
        if [h2[0], h2[2], h2[4]] != ["t0", "dt", "nt"]:
            raise FlowFormatError(f"bad time header line {lines[2]!r}")
        t0, dt, nt = float(h2[1]), float(h2[3]), int(h2[5])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FlowFormatError):
            raise
        raise FlowFormatError(f"unreadable GFLOW header: {exc}") from exc
    records = [ln for ln in lines[3:] if ln.strip()]
    need = nt * ny * nx
    if len(records) < need:
        raise FlowFormatError(f"declared {need} samples but found {len(records)}")
    if len(records) > need:
        raise FlowFormatError(f"trailing data: {len(records) - need} extra records")
    u = np.empty((nt, ny, nx))
    v = np.empty((nt, ny, nx))
    idx = 0
    for k in range(nt):
        for j in range(ny):
            for i in range(nx):
                parts = records[idx].split()
                if len(parts) != 2:
                    raise FlowFormatError(f"bad sample line {records[idx]!r}")
                try:
                    u[k, j, i] = float(parts[0])
                    v[k, j, i] = float(parts[1])
                except ValueError as exc:
                    raise FlowFormatError(f"bad sample line {records[idx]!r}") from exc
                idx += 1
    try:
        return FlowGrid(origin, dlat, dlon, ny, nx, t0, dt, nt, u, v)
    except ValueError as exc:
        raise FlowFormatError(str(exc)) from exc


def grid_from_source(
    src: FlowSource,
    sw: LatLon,
    ne: LatLon,
    nx: int,
    ny: int,
    t0: float,
    dt: float,
    nt: int,
) -> FlowGrid:
    """Sample any source onto a regular grid (fixture generation)."""
    if nx < 2 or ny < 2:
        raise ValueError("need nx, ny >= 2")
    dlon = (ne.lon - sw.lon) / (nx - 1)
    dlat = (ne.lat - sw.lat) / (ny - 1)
    u = np.empty((nt, ny, nx))
    v = np.empty((nt, ny, nx))
    for k in range(nt):
        t = t0 + k * dt
        for j in range(ny):
            for i in range(nx):
                p = LatLon(sw.lat + j * dlat, sw.lon + i * dlon)
                f = src.sample(p, t)
                # Quantize like the file format so save/load is lossless.
                u[k, j, i] = float(f"{f.u:.6g}")
                v[k, j, i] = float(f"{f.v:.6g}")
    return FlowGrid(LatLon(sw.lat, sw.lon), dlat, dlon, ny, nx, t0, dt, nt, u, v)
