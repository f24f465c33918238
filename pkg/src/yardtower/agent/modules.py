"""Built-in operation modules: trajectory driving and a work stub.

A module is a callable ``(params, ctx) -> None``; it raises
OperationCanceled when the cancel signal stopped it and OperationFailed on
bad input. ``ctx.clock`` carries the agent's clock scale, so a module
written against simulated milliseconds runs correctly at any acceleration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from threading import Event
from typing import Callable

from ..clock import Clock
from ..errors import YardError
from ..model import Pose


class OperationFailed(YardError):
    pass


class OperationCanceled(YardError):
    pass


class MalformedTrajectory(OperationFailed):
    pass


@dataclass
class ModuleContext:
    clock: Clock
    cancel: Event
    telemetry: Callable[[Pose | None, dict | None], None]
    sensor_rate_hz: float = 10.0
    diagnostics: dict = field(default_factory=dict)


def interpolate_pose(samples: list[dict], t_ms: float) -> Pose:
    """Pose at ``t_ms``: exact sample values at sample times, linear in
    between, clamped outside the span. Heading interpolates linearly too."""
    if t_ms <= samples[0]["t"]:
        s = samples[0]
        return Pose(s["x"], s["y"], s.get("heading", 0.0))
    if t_ms >= samples[-1]["t"]:
        s = samples[-1]
        return Pose(s["x"], s["y"], s.get("heading", 0.0))
    for a, b in zip(samples, samples[1:]):
        if a["t"] <= t_ms <= b["t"]:
            f = (t_ms - a["t"]) / (b["t"] - a["t"])
            return Pose(
                a["x"] + f * (b["x"] - a["x"]),
                a["y"] + f * (b["y"] - a["y"]),
                a.get("heading", 0.0)
                + f * (b.get("heading", 0.0) - a.get("heading", 0.0)),
            )
    raise AssertionError("unreachable")


def _validate_samples(params: dict) -> list[dict]:
    try:
        samples = params["trajectory"]["samples"]
    except (KeyError, TypeError):
        raise MalformedTrajectory("params.trajectory.samples missing") from None
    if not samples:
        raise MalformedTrajectory("empty trajectory")
    for s in samples:
        if not all(k in s for k in ("x", "y", "t")):
            raise MalformedTrajectory(f"sample missing fields: {s}")
    for a, b in zip(samples, samples[1:]):
        if b["t"] <= a["t"]:
            raise MalformedTrajectory("timestamps must strictly increase")
    return samples


def drive_module(params: dict, ctx: ModuleContext) -> None:
    """Follow a timed trajectory by interpolating the pose in scaled time,
    emitting telemetry at the sensor rate. Cancel stops motion at the
    current interpolated pose."""
    samples = _validate_samples(params)
    period_ms = 1000.0 / ctx.sensor_rate_hz
    end_t = samples[-1]["t"]
    start = ctx.clock.monotonic_ms()
    while True:
        sim_t = ctx.clock.elapsed_sim_ms(start)
        if ctx.cancel.is_set():
            ctx.telemetry(interpolate_pose(samples, sim_t), None)
            raise OperationCanceled(f"drive canceled at t={sim_t:.0f} ms")
        if sim_t >= end_t:
            ctx.telemetry(interpolate_pose(samples, end_t), None)
            return
        ctx.telemetry(interpolate_pose(samples, sim_t), None)
        ctx.clock.sleep_ms(period_ms)


def work_module(params: dict, ctx: ModuleContext) -> None:
    """Perform stationary work for ``duration_ms`` of simulated time,
    emitting a tick counter through the diagnostics channel."""
    try:
        duration_ms = float(params["duration_ms"])
    except (KeyError, TypeError, ValueError):
        raise OperationFailed("params.duration_ms missing or not a number") from None
    if duration_ms < 0 or not math.isfinite(duration_ms):
        raise OperationFailed(f"bad duration_ms {duration_ms!r}")
    period_ms = 1000.0 / ctx.sensor_rate_hz
    start = ctx.clock.monotonic_ms()
    ticks = 0
    while ctx.clock.elapsed_sim_ms(start) < duration_ms:
        if ctx.cancel.is_set():
            raise OperationCanceled(f"work canceled after {ticks} ticks")
        ticks += 1
        ctx.telemetry(None, {"work_ticks": ticks})
        ctx.clock.sleep_ms(period_ms)
    ctx.telemetry(None, {"work_ticks": ticks, "work_done": True})


BUILTIN_MODULES: dict[str, Callable[[dict, ModuleContext], None]] = {
    "drive": drive_module,
    "work": work_module,
}
