"""High-level path planning over the whole time-varying flow field.

Where the tracking controller only reacts to the flow at the glider's own
position, the planner searches an 8-connected grid of the deployment area
with time-expanded states, so edge costs can change with departure time
and strong-flow regions are avoided in advance: an edge whose cross flow
exceeds the glider speed, or whose net along-track ground speed is
non-positive, is impassable.

A* uses an admissible straight-line-over-max-flow heuristic and is checked
exactly against an exhaustive time-expanded Dijkstra on small instances.
Arrival times are bucketed (default 600 s) to bound the state space; a
search duration cap guarantees termination when the goal is unreachable.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .flowfield import FlowDomainError, FlowSource, FlowVector
from .geo import LatLon, LocalVec, from_local, to_local

IMPASSABLE = math.inf

DEFAULT_BUCKET_S = 600.0
DEFAULT_MAX_DURATION_S = 7 * 86_400.0

Cell = tuple[int, int]  # (ix, iy), x east, y north

_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(frozen=True)
class PlanGrid:
    south_west: LatLon
    cell: float  # meters
    nx: int
    ny: int
    t0: float

    def __post_init__(self) -> None:
        if self.cell <= 0:
            raise ValueError("cell size must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")
        if self.nx * self.ny > 1_000_000:
            raise ValueError("grid exceeds the 1e6 cell budget")

    @classmethod
    def from_bbox(cls, sw: LatLon, ne: LatLon, cell: float, t0: float) -> "PlanGrid":
        span = to_local(ne, sw)
        if span.east <= 0 or span.north <= 0:
            raise ValueError("bbox north-east corner must lie NE of south-west")
        nx = int(span.east // cell) + 1
        ny = int(span.north // cell) + 1
        return cls(south_west=sw, cell=cell, nx=nx, ny=ny, t0=t0)

    def center(self, c: Cell) -> LatLon:
        return from_local(LocalVec(c[0] * self.cell, c[1] * self.cell), self.south_west)

    def snap(self, p: LatLon) -> Cell:
        v = to_local(p, self.south_west)
        ix = int(round(v.east / self.cell))
        iy = int(round(v.north / self.cell))
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise ValueError(f"position {p} falls outside the planning box")
        return ix, iy

    def index(self, c: Cell) -> int:
        return c[1] * self.nx + c[0]


@dataclass
class PlanResult:
    path: list[LatLon]
    path_times: list[float]  # cumulative seconds from departure, per path cell
    total_time: float
    expanded_nodes: int
    blocked: bool


def edge_time(a: Cell, b: Cell, flow: FlowVector, speed: float, cell_m: float) -> float:
    """Traversal seconds for one grid edge, or IMPASSABLE.

    The glider crabs to cancel the cross component; the edge is impassable
    if the cross flow exceeds the glider speed or the resulting along-track
    ground speed is non-positive (strong adverse flow).
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    dx, dy = b[0] - a[0], b[1] - a[1]
    if max(abs(dx), abs(dy)) != 1 or (dx, dy) == (0, 0):
        raise ValueError(f"cells {a} and {b} are not 8-neighbors")
    length = cell_m * math.hypot(dx, dy)
    ex, ey = dx / math.hypot(dx, dy), dy / math.hypot(dx, dy)
    f_along = flow.u * ex + flow.v * ey
    f_cross = -flow.u * ey + flow.v * ex
    if abs(f_cross) > speed:
        return IMPASSABLE
    ground = speed * math.cos(math.asin(f_cross / speed)) + f_along
    if ground <= 0:
        return IMPASSABLE
    return length / ground


def _edge_flow(grid: PlanGrid, cell: Cell, flow: FlowSource, t: float) -> FlowVector | None:
    try:
        return flow.sample(grid.center(cell), t)
    except FlowDomainError:
        return None


def astar_plan(
    start: LatLon,
    goal: LatLon,
    flow: FlowSource,
    grid: PlanGrid,
    speed: float,
    bucket_s: float = DEFAULT_BUCKET_S,
    max_duration: float = DEFAULT_MAX_DURATION_S,
) -> PlanResult:
    """Minimal-travel-time path from start to goal cell, or blocked.

    Time-expanded search: a state is (cell, arrival-time bucket), edges cost
    ``edge_time`` with the flow read at the tail cell at the continuous
    arrival time.  The heuristic straight-line / (speed + max flow) is
    admissible and consistent, so the first goal pop is optimal.  Ties break
    on smaller heuristic, then row-major cell index, making results
    deterministic.
    """
    s = grid.snap(start)
    g_cell = grid.snap(goal)
    if s == g_cell:
        return PlanResult([grid.center(s)], [0.0], 0.0, 0, False)
    sw = grid.south_west
    ne = from_local(LocalVec((grid.nx - 1) * grid.cell, (grid.ny - 1) * grid.cell), sw)
    f_max = flow.max_speed(sw, ne, grid.t0, grid.t0 + max_duration)
    goal_local = LocalVec(g_cell[0] * grid.cell, g_cell[1] * grid.cell)

    def h(c: Cell) -> float:
        d = math.hypot(goal_local.east - c[0] * grid.cell, goal_local.north - c[1] * grid.cell)
        return d / (speed + f_max)

    t_start = grid.t0
    start_h = h(s)
    frontier: list[tuple[float, float, int, Cell, float]] = [
        (start_h, start_h, grid.index(s), s, t_start)
    ]
    parents: dict[tuple[Cell, int], tuple[Cell, int] | None] = {}
    arrival: dict[tuple[Cell, int], float] = {}
    done: set[tuple[Cell, int]] = set()
    start_state = (s, _bucket(t_start, grid.t0, bucket_s))
    parents[start_state] = None
    arrival[start_state] = t_start
    expanded = 0
    goal_state: tuple[Cell, int] | None = None
    while frontier:
        f_cost, _, _, cell, t = heapq.heappop(frontier)
        state = (cell, _bucket(t, grid.t0, bucket_s))
        if state in done:
            continue
        done.add(state)
        expanded += 1
        if cell == g_cell:
            goal_state = state
            break
        fv = _edge_flow(grid, cell, flow, t)
        if fv is None:
            continue
        for dx, dy in _NEIGHBORS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if not (0 <= nxt[0] < grid.nx and 0 <= nxt[1] < grid.ny):
                continue
            cost = edge_time(cell, nxt, fv, speed, grid.cell)
            if math.isinf(cost):
                continue
            t_next = t + cost
            if t_next - grid.t0 > max_duration:
                continue
            n_state = (nxt, _bucket(t_next, grid.t0, bucket_s))
            if n_state in done:
                continue
            if n_state in arrival and arrival[n_state] <= t_next:
                continue
            arrival[n_state] = t_next
            parents[n_state] = state
            nh = h(nxt)
            heapq.heappush(
                frontier, (t_next - grid.t0 + nh, nh, grid.index(nxt), nxt, t_next)
            )
    if goal_state is None:
        return PlanResult([], [], IMPASSABLE, expanded, True)
    cells: list[tuple[Cell, int]] = []
    cur: tuple[Cell, int] | None = goal_state
    while cur is not None:
        cells.append(cur)
        cur = parents[cur]
    cells.reverse()
    path = [grid.center(c) for c, _ in cells]
    times = [arrival[st] - grid.t0 for st in cells]
    return PlanResult(path, times, arrival[goal_state] - grid.t0, expanded, False)


def dijkstra_oracle(
    start: LatLon,
    goal: LatLon,
    flow: FlowSource,
    grid: PlanGrid,
    speed: float,
    bucket_s: float = DEFAULT_BUCKET_S,
    max_duration: float = DEFAULT_MAX_DURATION_S,
) -> PlanResult:
    """Exhaustive time-expanded Dijkstra over the same contract as astar_plan.

    Deliberately written without the heuristic machinery so it can serve as
    an independent check of the A* implementation.
    """
    s = grid.snap(start)
    g_cell = grid.snap(goal)
    if s == g_cell:
        return PlanResult([grid.center(s)], [0.0], 0.0, 0, False)
    heap: list[tuple[float, int, Cell, float]] = [(0.0, grid.index(s), s, grid.t0)]
    best: dict[tuple[Cell, int], float] = {}
    prev: dict[tuple[Cell, int], tuple[Cell, int] | None] = {}
    settled: set[tuple[Cell, int]] = set()
    first = (s, _bucket(grid.t0, grid.t0, bucket_s))
    best[first] = grid.t0
    prev[first] = None
    expanded = 0
    found: tuple[Cell, int] | None = None
    while heap:
        _, _, cell, t = heapq.heappop(heap)
        state = (cell, _bucket(t, grid.t0, bucket_s))
        if state in settled:
            continue
        settled.add(state)
        expanded += 1
        if cell == g_cell:
            found = state
            break
        try:
            fv = flow.sample(grid.center(cell), t)
        except FlowDomainError:
            continue
        for dx, dy in _NEIGHBORS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if not (0 <= nxt[0] < grid.nx and 0 <= nxt[1] < grid.ny):
                continue
            cost = edge_time(cell, nxt, fv, speed, grid.cell)
            if math.isinf(cost):
                continue
            t_next = t + cost
            if t_next - grid.t0 > max_duration:
                continue
            n_state = (nxt, _bucket(t_next, grid.t0, bucket_s))
            if n_state in settled:
                continue
            if n_state not in best or t_next < best[n_state]:
                best[n_state] = t_next
                prev[n_state] = state
                heapq.heappush(heap, (t_next - grid.t0, grid.index(nxt), nxt, t_next))
    if found is None:
        return PlanResult([], [], IMPASSABLE, expanded, True)
    chain: list[tuple[Cell, int]] = []
    cur: tuple[Cell, int] | None = found
    while cur is not None:
        chain.append(cur)
        cur = prev[cur]
    chain.reverse()
    path = [grid.center(c) for c, _ in chain]
    times = [best[st] - grid.t0 for st in chain]
    return PlanResult(path, times, best[found] - grid.t0, expanded, False)


def _bucket(t: float, t0: float, bucket_s: float) -> int:
    return int((t - t0) // bucket_s)


def path_csv(result: PlanResult) -> bytes:
    """Dump a plan as ``lat,lon,cumulative_time`` CSV."""
    lines = ["lat,lon,cumulative_time"]
    for p, t in zip(result.path, result.path_times):
        lines.append(f"{p.lat!r},{p.lon!r},{t!r}")
    return ("\n".join(lines) + "\n").encode("ascii")


def downsample_targets(path: list[LatLon], min_spacing_m: float = 2000.0) -> list[LatLon]:
    """Thin a planned path into a target sequence for the tracking layer."""
    if not path:
        return []
    targets = [path[0]]
    for p in path[1:]:
        if to_local(p, targets[-1]).norm() >= min_spacing_m:
            targets.append(p)
    if targets[-1] != path[-1]:
        targets.append(path[-1])
    return targets
