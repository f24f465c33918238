from .transitions import (
    AgentEvent,
    IllegalTransition,
    MissionEvent,
    transition_agent,
    transition_mission,
)
from .types import (
    AgentClass,
    AgentRecord,
    AgentStatus,
    ApplyResult,
    Assignment,
    AssignmentPayload,
    AssignmentStatus,
    Connection,
    DomainEvent,
    EventKind,
    Geometry,
    MapObject,
    MissionRecipe,
    MissionRecord,
    MissionStatus,
    OperationRequest,
    Pose,
    RecipeStep,
    SensorReport,
    ServiceDomain,
    ServiceRegistration,
    StepResult,
    new_id,
)
from .validation import Violation, validate_recipe

__all__ = [
    "AgentClass",
    "AgentEvent",
    "AgentRecord",
    "AgentStatus",
    "ApplyResult",
    "Assignment",
    "AssignmentPayload",
    "AssignmentStatus",
    "Connection",
    "DomainEvent",
    "EventKind",
    "Geometry",
    "IllegalTransition",
    "MapObject",
    "MissionEvent",
    "MissionRecipe",
    "MissionRecord",
    "MissionStatus",
    "OperationRequest",
    "Pose",
    "RecipeStep",
    "SensorReport",
    "ServiceDomain",
    "ServiceRegistration",
    "StepResult",
    "Violation",
    "new_id",
    "transition_agent",
    "transition_mission",
    "validate_recipe",
]
