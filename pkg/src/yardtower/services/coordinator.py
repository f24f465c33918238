"""Reference trajectory coordinator.

Stands in for a proprietary cooperative scheduler: paths from the planner are
timestamped at constant speed and deconflicted purely by start delays. Delays
grow greedily in 500 ms increments, in input order, until the candidate keeps
at least ``d_min`` clearance from every active and previously scheduled
trajectory at every instant of a fine (100 ms) resampling. Positions clamp to
the first/last sample outside a trajectory's span, so vehicles parked before
departure or after arrival still occupy space. Total delay is capped at
300 s; past that the input is declared unschedulable.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

from ..clock import Clock
from ..errors import YardError

DEFAULT_SPEED = 2.0  # m/s
DELAY_STEP_MS = 500.0
MAX_DELAY_MS = 300_000.0
CHECK_STEP_MS = 100.0
SEPARATION_MARGIN = 0.5  # m, added to summed inflation radii for default d_min


class Unschedulable(YardError):
    pass


@dataclass(frozen=True)
class TrajectorySample:
    x: float
    y: float
    heading: float
    t: float  # ms from trajectory start

    def to_doc(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading, "t": self.t}

    @classmethod
    def from_doc(cls, doc: dict) -> "TrajectorySample":
        return cls(
            x=float(doc["x"]),
            y=float(doc["y"]),
            heading=float(doc.get("heading", 0.0)),
            t=float(doc["t"]),
        )


@dataclass(frozen=True)
class TimedTrajectory:
    agent_uuid: str
    samples: tuple[TrajectorySample, ...]

    @property
    def start_ms(self) -> float:
        return self.samples[0].t

    @property
    def end_ms(self) -> float:
        return self.samples[-1].t

    def position_at(self, t: float) -> tuple[float, float]:
        """Linear interpolation, clamped to the endpoints outside the span."""
        samples = self.samples
        if t <= samples[0].t:
            return (samples[0].x, samples[0].y)
        if t >= samples[-1].t:
            return (samples[-1].x, samples[-1].y)
        lo, hi = 0, len(samples) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if samples[mid].t <= t:
                lo = mid
            else:
                hi = mid
        a, b = samples[lo], samples[hi]
        frac = (t - a.t) / (b.t - a.t)
        return (a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y))

    def shifted(self, delta_ms: float) -> "TimedTrajectory":
        return TimedTrajectory(
            self.agent_uuid,
            tuple(TrajectorySample(s.x, s.y, s.heading, s.t + delta_ms) for s in self.samples),
        )

    def to_doc(self) -> dict:
        return {"agent_uuid": self.agent_uuid, "samples": [s.to_doc() for s in self.samples]}

    @classmethod
    def from_doc(cls, doc: dict) -> "TimedTrajectory":
        return cls(
            agent_uuid=doc["agent_uuid"],
            samples=tuple(TrajectorySample.from_doc(s) for s in doc["samples"]),
        )


def timestamp_path(
    agent_uuid: str, waypoints: list[tuple[float, float]], v: float, delay_ms: float = 0.0
) -> TimedTrajectory:
    """Constant-speed timestamps; heading is the direction of travel of the
    segment being entered, repeated on the final sample."""
    if not waypoints:
        raise ValueError("empty path")
    samples: list[TrajectorySample] = []
    t = delay_ms
    heading = 0.0
    for i, (x, y) in enumerate(waypoints):
        if i > 0:
            px, py = waypoints[i - 1]
            dist = math.hypot(x - px, y - py)
            if dist == 0.0:
                continue
            t += dist / v * 1000.0
        if i < len(waypoints) - 1:
            nx, ny = waypoints[i + 1]
            if (nx, ny) != (x, y):
                heading = math.atan2(ny - y, nx - x)
        samples.append(TrajectorySample(x, y, heading, t))
    return TimedTrajectory(agent_uuid, tuple(samples))


def min_separation(a: TimedTrajectory, b: TimedTrajectory, step_ms: float = CHECK_STEP_MS) -> float:
    """Minimum distance between two trajectories sampled every ``step_ms``
    over the union of their spans (clamped: parked vehicles occupy space)."""
    t0 = min(a.start_ms, b.start_ms)
    t1 = max(a.end_ms, b.end_ms)
    best = math.inf
    t = t0
    while True:
        ax, ay = a.position_at(t)
        bx, by = b.position_at(t)
        best = min(best, math.hypot(ax - bx, ay - by))
        if t >= t1:
            return best
        t = min(t + step_ms, t1)


def schedule_trajectories(
    new_paths: list[tuple[str, list[tuple[float, float]]]],
    active: list[TimedTrajectory],
    v: float = DEFAULT_SPEED,
    d_min: float = 0.0,
    *,
    delay_step_ms: float = DELAY_STEP_MS,
    max_delay_ms: float = MAX_DELAY_MS,
    check_step_ms: float = CHECK_STEP_MS,
) -> list[TimedTrajectory]:
    """Timestamp and deconflict paths in input order.

    ``active`` trajectories must already be expressed in the same local
    timeframe as the new ones (t=0 is "now"). Trajectories of the same agent
    never conflict with each other (a new plan supersedes the old one).
    """
    scheduled: list[TimedTrajectory] = []
    for agent_uuid, waypoints in new_paths:
        base = timestamp_path(agent_uuid, waypoints, v)
        others = [t for t in active + scheduled if t.agent_uuid != agent_uuid]
        delay = 0.0
        while True:
            candidate = base.shifted(delay) if delay else base
            if d_min <= 0.0 or all(
                min_separation(candidate, other, check_step_ms) >= d_min for other in others
            ):
                break
            delay += delay_step_ms
            if delay > max_delay_ms:
                raise Unschedulable(
                    f"agent {agent_uuid}: no conflict-free start within {max_delay_ms:.0f} ms"
                )
        scheduled.append(candidate)
    return scheduled


def default_d_min(radii: list[float]) -> float:
    """Largest pairwise sum of inflation radii plus a fixed margin."""
    if len(radii) < 2:
        return 0.0
    top = sorted(radii, reverse=True)
    return top[0] + top[1] + SEPARATION_MARGIN


def _heading_at(traj: TimedTrajectory, t: float) -> float:
    heading = traj.samples[0].heading
    for s in traj.samples:
        if s.t > t:
            break
        heading = s.heading
    return heading


def _slice_between(traj: TimedTrajectory, t0: float, t1: float) -> tuple[TrajectorySample, ...]:
    """Samples covering [t0, t1], with interpolated boundary samples, times
    re-zeroed to the slice start."""
    out: list[TrajectorySample] = []
    x0, y0 = traj.position_at(t0)
    out.append(TrajectorySample(x0, y0, _heading_at(traj, t0), 0.0))
    for s in traj.samples:
        if t0 < s.t < t1:
            out.append(TrajectorySample(s.x, s.y, s.heading, s.t - t0))
    if t1 > t0:
        x1, y1 = traj.position_at(t1)
        out.append(TrajectorySample(x1, y1, out[-1].heading, t1 - t0))
    return tuple(out)


def build_payload(trajectory: TimedTrajectory, work_plan: dict | None) -> dict:
    """Assignment payload for one agent.

    Without a work plan: a single step driving the whole trajectory. A work
    plan splits the drive at fractions of its duration into ordered segments
    of kind ``drive``, ``drive_work`` (drive and work concurrently) or
    ``work`` (stationary work for ``duration_ms``).
    """
    if not work_plan:
        return {"steps": [{"operations": [_drive_op(trajectory.samples)]}]}

    steps = []
    total = trajectory.end_ms - trajectory.start_ms
    cursor = trajectory.start_ms
    for segment in work_plan.get("segments", []):
        kind = segment["kind"]
        if kind == "work":
            steps.append(
                {"operations": [{"module": "work", "params": {"duration_ms": segment["duration_ms"]}}]}
            )
            continue
        until = trajectory.start_ms + float(segment["until_frac"]) * total
        samples = _slice_between(trajectory, cursor, until)
        ops = [_drive_op(samples)]
        if kind == "drive_work":
            ops.append({"module": "work", "params": {"duration_ms": samples[-1].t}})
        elif kind != "drive":
            raise ValueError(f"unknown work segment kind {kind!r}")
        steps.append({"operations": ops})
        cursor = until
    if cursor < trajectory.end_ms:
        steps.append({"operations": [_drive_op(_slice_between(trajectory, cursor, trajectory.end_ms))]})
    return {"steps": steps}


def _drive_op(samples: tuple[TrajectorySample, ...]) -> dict:
    return {
        "module": "drive",
        "params": {"trajectory": {"samples": [s.to_doc() for s in samples]}},
    }


@dataclass
class _ActiveEntry:
    trajectory: TimedTrajectory
    anchor_ms: int  # wall time the trajectory was issued
    radius: float


class TrajectoryCoordinator:
    """Job handler holding the registry of trajectories it has issued.

    ``time_scale`` is the clock acceleration of the executing agents; it
    converts wall time between calls into trajectory-time offsets and decides
    when an issued trajectory has certainly finished and can be dropped.
    """

    def __init__(
        self,
        *,
        speed: float = DEFAULT_SPEED,
        time_scale: float = 1.0,
        clock: Clock | None = None,
        linger_ms: float = 5_000.0,
    ):
        self.speed = speed
        self.time_scale = time_scale
        self.linger_ms = linger_ms
        self._clock = clock or Clock()
        self._lock = threading.Lock()
        self._active: dict[str, _ActiveEntry] = {}

    def _active_in_local_time(self, now_ms: int, exclude: set[str]) -> list[TimedTrajectory]:
        out = []
        for entry in self._active.values():
            if entry.trajectory.agent_uuid in exclude:
                continue
            wall_duration = entry.trajectory.end_ms / self.time_scale
            if now_ms > entry.anchor_ms + wall_duration + self.linger_ms:
                continue
            shift = (entry.anchor_ms - now_ms) * self.time_scale
            out.append(entry.trajectory.shifted(shift))
        return out

    def __call__(self, doc: dict) -> dict:
        from .kit import HandlerFailure

        request = doc.get("request", {})
        context = doc.get("context", {})
        agents = {a["agent_uuid"]: a for a in context.get("agents", [])}

        paths: list[tuple[str, list[tuple[float, float]]]] = []
        for dep in context.get("dependencies", []):
            for p in dep.get("result", {}).get("paths", []):
                waypoints = [(float(w["x"]), float(w["y"])) for w in p["waypoints"]]
                paths.append((p["agent_uuid"], waypoints))
        if not paths:
            raise HandlerFailure("no planned paths in step dependencies")

        from .planner import inflation_radius
        from ..model import Geometry

        radii: dict[str, float] = {}
        for agent_uuid, _ in paths:
            agent = agents.get(agent_uuid)
            radii[agent_uuid] = (
                inflation_radius(Geometry.from_doc(agent["geometry"])) if agent else 1.0
            )

        v = float(request.get("v", self.speed))
        with self._lock:
            now = self._clock.now_ms()
            new_ids = {agent_uuid for agent_uuid, _ in paths}
            active = self._active_in_local_time(now, exclude=new_ids)
            all_radii = list(radii.values()) + [
                self._active[t.agent_uuid].radius for t in active if t.agent_uuid in self._active
            ]
            d_min = float(request.get("d_min", default_d_min(all_radii)))
            try:
                trajectories = schedule_trajectories(paths, active, v=v, d_min=d_min)
            except Unschedulable as exc:
                raise HandlerFailure(str(exc)) from None
            for trajectory in trajectories:
                self._active[trajectory.agent_uuid] = _ActiveEntry(
                    trajectory, now, radii.get(trajectory.agent_uuid, 1.0)
                )

        work_plans = request.get("work_plan") or {}
        assignments = [
            {
                "agent_uuid": t.agent_uuid,
                "payload": build_payload(t, work_plans.get(t.agent_uuid)),
            }
            for t in trajectories
        ]
        return {"assignments": assignments}
