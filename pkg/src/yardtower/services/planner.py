"""Reference grid path planner.

Stands in for a proprietary single-vehicle planner: map polygons are
rasterized onto an occupancy grid (a cell is blocked iff its center lies
within an obstacle polygon inflated by the vehicle's inflation radius, half
the footprint diagonal), then A* searches the 8-connected grid with move
costs 1 and sqrt(2) and the octile heuristic. Ties are broken by
(f, h, x, y) so identical inputs always yield the identical waypoint
sequence. Returned cost is optimal; no smoothing, no kinematics.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from ..errors import YardError
from ..model import Geometry, MapObject

SQRT2 = math.sqrt(2.0)

# (dx, dy, step cost); fixed order keeps expansion deterministic.
_NEIGHBORS = (
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT2),
    (1, -1, SQRT2),
    (-1, 1, SQRT2),
    (-1, -1, SQRT2),
)


class StartBlocked(YardError):
    pass


class GoalBlocked(YardError):
    pass


class NoPath(YardError):
    pass


def _point_in_polygon(x: float, y: float, poly: tuple[tuple[float, float], ...]) -> bool:
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xi:
                inside = not inside
    return inside


def _dist_point_segment(px, py, x1, y1, x2, y2) -> float:
    dx, dy = x2 - x1, y2 - y1
    if dx == 0 and dy == 0:
        return math.hypot(px - x1, py - y1)
    t = ((px - x1) * dx + (py - y1) * dy) / (dx * dx + dy * dy)
    t = max(0.0, min(1.0, t))
    return math.hypot(px - (x1 + t * dx), py - (y1 + t * dy))


def point_within_inflated(x: float, y: float, poly: tuple[tuple[float, float], ...], radius: float) -> bool:
    """True iff (x, y) lies within ``poly`` grown by ``radius`` (Minkowski
    sum with a disc): inside the polygon or within ``radius`` of its edge."""
    if _point_in_polygon(x, y, poly):
        return True
    if radius <= 0:
        return False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if _dist_point_segment(x, y, x1, y1, x2, y2) <= radius:
            return True
    return False


@dataclass
class OccupancyGrid:
    origin_x: float
    origin_y: float
    cell_size: float
    width: int
    height: int
    blocked: list[list[bool]]  # blocked[row][col], row = y index

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        col = int(math.floor((x - self.origin_x) / self.cell_size))
        row = int(math.floor((y - self.origin_y) / self.cell_size))
        if 0 <= col < self.width and 0 <= row < self.height:
            return (col, row)
        return None

    def center_of(self, cell: tuple[int, int]) -> tuple[float, float]:
        col, row = cell
        return (
            self.origin_x + (col + 0.5) * self.cell_size,
            self.origin_y + (row + 0.5) * self.cell_size,
        )

    def is_blocked(self, cell: tuple[int, int]) -> bool:
        return self.blocked[cell[1]][cell[0]]


def build_grid(
    obstacles: list[MapObject],
    inflation_radius: float,
    cell_size: float = 0.5,
    margin: float = 10.0,
    extra_points: list[tuple[float, float]] | None = None,
) -> OccupancyGrid:
    """Rasterize obstacle polygons. Bounds cover all obstacle polygons and
    any ``extra_points`` (start/goal, so empty maps still get a grid), plus
    the margin on every side."""
    xs: list[float] = []
    ys: list[float] = []
    for obj in obstacles:
        for x, y in obj.geometry:
            xs.append(x)
            ys.append(y)
    for x, y in extra_points or []:
        xs.append(x)
        ys.append(y)
    if not xs:
        xs, ys = [0.0], [0.0]
    origin_x, origin_y = min(xs) - margin, min(ys) - margin
    width = max(1, int(math.ceil((max(xs) + margin - origin_x) / cell_size)))
    height = max(1, int(math.ceil((max(ys) + margin - origin_y) / cell_size)))

    blocked = [[False] * width for _ in range(height)]
    for obj in obstacles:
        # Only rasterize near the polygon; scanning the whole grid per object
        # would be quadratic in yard size.
        ox = [p[0] for p in obj.geometry]
        oy = [p[1] for p in obj.geometry]
        pad = inflation_radius + cell_size
        col_lo = max(0, int((min(ox) - pad - origin_x) / cell_size))
        col_hi = min(width - 1, int((max(ox) + pad - origin_x) / cell_size) + 1)
        row_lo = max(0, int((min(oy) - pad - origin_y) / cell_size))
        row_hi = min(height - 1, int((max(oy) + pad - origin_y) / cell_size) + 1)
        for row in range(row_lo, row_hi + 1):
            cy = origin_y + (row + 0.5) * cell_size
            for col in range(col_lo, col_hi + 1):
                if blocked[row][col]:
                    continue
                cx = origin_x + (col + 0.5) * cell_size
                if point_within_inflated(cx, cy, obj.geometry, inflation_radius):
                    blocked[row][col] = True
    return OccupancyGrid(origin_x, origin_y, cell_size, width, height, blocked)


def octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def astar_grid(
    blocked: list[list[bool]], start: tuple[int, int], goal: tuple[int, int]
) -> tuple[list[tuple[int, int]], float] | None:
    """Optimal 8-connected path on a blocked matrix, or None.

    Returns (cells, cost) with cost in cell units. Diagonal moves are allowed
    between two free cells regardless of the shared corners.
    """
    height = len(blocked)
    width = len(blocked[0]) if height else 0
    if start == goal:
        return [start], 0.0

    g: dict[tuple[int, int], float] = {start: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    h0 = octile(start, goal)
    open_heap: list[tuple[float, float, int, int]] = [(h0, h0, start[0], start[1])]
    closed: set[tuple[int, int]] = set()

    while open_heap:
        f, h, x, y = heapq.heappop(open_heap)
        cell = (x, y)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == goal:
            path = [cell]
            while cell in came:
                cell = came[cell]
                path.append(cell)
            path.reverse()
            return path, g[goal]
        gc = g[cell]
        for dx, dy, step in _NEIGHBORS:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < width and 0 <= ny < height) or blocked[ny][nx]:
                continue
            neighbor = (nx, ny)
            ng = gc + step
            if ng < g.get(neighbor, math.inf):
                g[neighbor] = ng
                came[neighbor] = cell
                nh = octile(neighbor, goal)
                heapq.heappush(open_heap, (ng + nh, nh, nx, ny))
    return None


def inflation_radius(footprint: Geometry) -> float:
    return math.hypot(footprint.length_m, footprint.width_m) / 2.0


def plan_path(
    map_objects: list[MapObject],
    start: tuple[float, float],
    goal: tuple[float, float],
    footprint: Geometry,
    *,
    cell_size: float = 0.5,
    blocking_types: tuple[str, ...] = ("obstacle",),
) -> list[tuple[float, float]]:
    """Collision-free waypoint list from start to goal in yard coordinates.

    Only objects whose object_type is in ``blocking_types`` block cells;
    gates and parking slots are destinations, not walls.
    """
    obstacles = [o for o in map_objects if o.object_type in blocking_types]
    radius = inflation_radius(footprint)
    grid = build_grid(obstacles, radius, cell_size=cell_size, extra_points=[start, goal])

    start_cell = grid.cell_of(*start)
    if start_cell is None or grid.is_blocked(start_cell):
        raise StartBlocked(f"start {start} is outside bounds or blocked")
    goal_cell = grid.cell_of(*goal)
    if goal_cell is None or grid.is_blocked(goal_cell):
        raise GoalBlocked(f"goal {goal} is outside bounds or blocked")

    found = astar_grid(grid.blocked, start_cell, goal_cell)
    if found is None:
        raise NoPath(f"no path from {start} to {goal}")
    cells, _cost = found
    # Interior waypoints sit on cell centers; the endpoints are the exact
    # requested coordinates (each within half a cell of its snapped center).
    waypoints = [grid.center_of(c) for c in cells]
    waypoints[0] = start
    waypoints[-1] = goal
    return waypoints


def resolve_goal(request: dict, yard_state: dict, agent_uuid: str) -> tuple[float, float]:
    """Goal lookup for one agent: per-agent ``goals``/``goal_objects`` win
    over the shared ``goal``/``goal_object``; named objects resolve to the
    centroid of their polygon."""
    goals = request.get("goals") or {}
    goal_objects = request.get("goal_objects") or {}
    if agent_uuid in goals:
        doc = goals[agent_uuid]
        return (float(doc["x"]), float(doc["y"]))
    name = goal_objects.get(agent_uuid) or request.get("goal_object")
    if name is not None:
        for obj in yard_state.get("map_objects", []):
            if obj["object_id"] == name:
                pts = obj["geometry"]
                return (
                    sum(p["x"] for p in pts) / len(pts),
                    sum(p["y"] for p in pts) / len(pts),
                )
        raise KeyError(f"goal object {name!r} not in yard state")
    doc = request.get("goal")
    if doc is None:
        raise KeyError(f"no goal for agent {agent_uuid!r}")
    return (float(doc["x"]), float(doc["y"]))


def planner_handler(doc: dict) -> dict:
    """Job handler: plans one path per reserved agent in the request
    context. Result shape: ``{"paths": [{"agent_uuid", "waypoints"}]}``."""
    from .kit import HandlerFailure

    request = doc.get("request", {})
    context = doc.get("context", {})
    yard = context.get("yard_state", {})
    agents = context.get("agents", [])
    if not agents:
        raise HandlerFailure("no agents in request context")
    map_objects = [MapObject.from_doc(d) for d in yard.get("map_objects", [])]

    paths = []
    for agent in agents:
        if not agent.get("pose"):
            raise HandlerFailure(f"agent {agent['agent_uuid']} has no pose")
        start = (float(agent["pose"]["x"]), float(agent["pose"]["y"]))
        try:
            goal = resolve_goal(request, yard, agent["agent_uuid"])
        except KeyError as exc:
            raise HandlerFailure(str(exc)) from None
        footprint = Geometry.from_doc(agent["geometry"])
        try:
            waypoints = plan_path(map_objects, start, goal, footprint)
        except (StartBlocked, GoalBlocked, NoPath) as exc:
            raise HandlerFailure(f"{type(exc).__name__}: {exc}") from None
        paths.append(
            {
                "agent_uuid": agent["agent_uuid"],
                "waypoints": [{"x": x, "y": y} for x, y in waypoints],
            }
        )
    return {"paths": paths}
