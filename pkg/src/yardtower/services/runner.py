"""Build a runnable reference service from a config document.

Config shape: ``{"name", "kind", "port", "api_key", "mode": "fast"|"slow",
"delay_ms", "never_ready", "speed", "time_scale", "export_dir", "result"}``.
Kinds: ``planner``, ``coordinator``, ``map``, ``storage`` and ``scripted``
(returns the configured ``result`` verbatim; handy for test scenarios).
"""
from __future__ import annotations

from pathlib import Path

from .coordinator import TrajectoryCoordinator
from .kit import Handler, JobTable, ServiceServer
from .mapsvc import map_handler
from .planner import planner_handler
from .storage import StorageExporter

KINDS = ("planner", "coordinator", "map", "storage", "scripted")


def build_handler(config: dict) -> Handler:
    kind = config.get("kind")
    if kind == "planner":
        return planner_handler
    if kind == "coordinator":
        return TrajectoryCoordinator(
            speed=float(config.get("speed", 2.0)),
            time_scale=float(config.get("time_scale", 1.0)),
        )
    if kind == "map":
        return map_handler
    if kind == "storage":
        return StorageExporter(Path(config.get("export_dir", "exports")))
    if kind == "scripted":
        result = config.get("result", {})
        return lambda doc: result
    raise ValueError(f"unknown service kind {config.get('kind')!r}; expected one of {KINDS}")


def build_service(config: dict) -> ServiceServer:
    table = JobTable(
        build_handler(config),
        mode=config.get("mode", "fast"),
        delay_ms=float(config.get("delay_ms", 0.0)),
        never_ready=bool(config.get("never_ready", False)),
    )
    return ServiceServer(
        table,
        api_key=config["api_key"],
        host=config.get("host", "127.0.0.1"),
        port=int(config.get("port", 0)),
    )
