from .modules import (
    BUILTIN_MODULES,
    MalformedTrajectory,
    ModuleContext,
    OperationCanceled,
    OperationFailed,
    drive_module,
    interpolate_pose,
    work_module,
)
from .runtime import AgentConfig, AgentRuntime, EmptySteps, UnknownModule, run_agent, split_assignment

__all__ = [
    "AgentConfig",
    "AgentRuntime",
    "BUILTIN_MODULES",
    "EmptySteps",
    "MalformedTrajectory",
    "ModuleContext",
    "OperationCanceled",
    "OperationFailed",
    "UnknownModule",
    "drive_module",
    "interpolate_pose",
    "run_agent",
    "split_assignment",
    "work_module",
]
