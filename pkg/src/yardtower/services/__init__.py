from .coordinator import (
    TimedTrajectory,
    TrajectoryCoordinator,
    TrajectorySample,
    Unschedulable,
    build_payload,
    default_d_min,
    min_separation,
    schedule_trajectories,
    timestamp_path,
)
from .kit import HandlerFailure, JobTable, ServiceServer
from .mapsvc import map_handler
from .planner import (
    GoalBlocked,
    NoPath,
    OccupancyGrid,
    StartBlocked,
    astar_grid,
    build_grid,
    inflation_radius,
    plan_path,
    planner_handler,
)
from .runner import build_handler, build_service
from .storage import StorageExporter

__all__ = [
    "GoalBlocked",
    "HandlerFailure",
    "JobTable",
    "NoPath",
    "OccupancyGrid",
    "ServiceServer",
    "StartBlocked",
    "StorageExporter",
    "TimedTrajectory",
    "TrajectoryCoordinator",
    "TrajectorySample",
    "Unschedulable",
    "astar_grid",
    "build_grid",
    "build_handler",
    "build_payload",
    "build_service",
    "default_d_min",
    "inflation_radius",
    "map_handler",
    "min_separation",
    "plan_path",
    "planner_handler",
    "schedule_trajectories",
    "timestamp_path",
]
