"""Domain value types shared by the tower, broker, services and agents.

Instances are plain dataclasses; ``to_doc``/``from_doc`` convert to and from
the JSON document shapes used on every external surface (field names are
lower_snake_case and stable). Units: meters, radians, integer epoch
milliseconds.
"""
from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Any


def new_id() -> str:
    return str(uuid.uuid4())


class AgentClass(str, Enum):
    VEHICLE = "vehicle"
    TOOL = "tool"
    SENSOR = "sensor"
    OTHER = "other"


class AgentStatus(str, Enum):
    FREE = "free"
    READY = "ready"
    BUSY = "busy"


class Connection(str, Enum):
    ONLINE = "online"
    OFFLINE = "offline"


class MissionStatus(str, Enum):
    CREATED = "created"
    RESERVING = "reserving"
    PLANNING = "planning"
    DISPATCHING = "dispatching"
    EXECUTING = "executing"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    CANCELED = "canceled"

    @property
    def terminal(self) -> bool:
        return self in (MissionStatus.SUCCEEDED, MissionStatus.FAILED, MissionStatus.CANCELED)


class ServiceDomain(str, Enum):
    ASSIGNMENT_PLANNER = "assignment_planner"
    MAP_SERVER = "map_server"
    STORAGE_SERVER = "storage_server"
    AUTOMATON = "automaton"


class ApplyResult(str, Enum):
    NONE = "none"
    MAP_WRITE = "map_write"
    ASSIGNMENT_SOURCE = "assignment_source"


class AssignmentStatus(str, Enum):
    TO_DISPATCH = "to_dispatch"
    DISPATCHED = "dispatched"
    EXECUTING = "executing"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    CANCELED = "canceled"

    @property
    def terminal(self) -> bool:
        return self in (
            AssignmentStatus.SUCCEEDED,
            AssignmentStatus.FAILED,
            AssignmentStatus.CANCELED,
        )


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def to_doc(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading}

    @classmethod
    def from_doc(cls, doc: dict) -> "Pose":
        return cls(x=float(doc["x"]), y=float(doc["y"]), heading=float(doc.get("heading", 0.0)))


@dataclass(frozen=True)
class Geometry:
    """Agent footprint in the vehicle frame."""

    length_m: float
    width_m: float
    turning_radius_m: float = 0.0
    polygon: tuple[tuple[float, float], ...] | None = None

    def to_doc(self) -> dict:
        doc: dict[str, Any] = {
            "length_m": self.length_m,
            "width_m": self.width_m,
            "turning_radius_m": self.turning_radius_m,
        }
        if self.polygon is not None:
            doc["polygon"] = [{"x": x, "y": y} for x, y in self.polygon]
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "Geometry":
        polygon = None
        if doc.get("polygon") is not None:
            polygon = tuple((float(p["x"]), float(p["y"])) for p in doc["polygon"])
        return cls(
            length_m=float(doc["length_m"]),
            width_m=float(doc["width_m"]),
            turning_radius_m=float(doc.get("turning_radius_m", 0.0)),
            polygon=polygon,
        )


@dataclass
class AgentRecord:
    agent_uuid: str
    name: str
    agent_class: AgentClass
    geometry: Geometry
    status: AgentStatus = AgentStatus.FREE
    pose: Pose | None = None
    connection: Connection = Connection.ONLINE
    reserved_by: str | None = None
    last_seen: int = 0

    @property
    def reservable(self) -> bool:
        return (
            self.connection is Connection.ONLINE
            and self.status is AgentStatus.FREE
            and self.reserved_by is None
        )

    def to_doc(self) -> dict:
        return {
            "agent_uuid": self.agent_uuid,
            "name": self.name,
            "agent_class": self.agent_class.value,
            "geometry": self.geometry.to_doc(),
            "status": self.status.value,
            "pose": self.pose.to_doc() if self.pose else None,
            "connection": self.connection.value,
            "reserved_by": self.reserved_by,
            "last_seen": self.last_seen,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "AgentRecord":
        return cls(
            agent_uuid=doc["agent_uuid"],
            name=doc["name"],
            agent_class=AgentClass(doc["agent_class"]),
            geometry=Geometry.from_doc(doc["geometry"]),
            status=AgentStatus(doc["status"]),
            pose=Pose.from_doc(doc["pose"]) if doc.get("pose") else None,
            connection=Connection(doc["connection"]),
            reserved_by=doc.get("reserved_by"),
            last_seen=int(doc.get("last_seen", 0)),
        )


@dataclass(frozen=True)
class RecipeStep:
    step_id: str
    service_name: str
    run_order: int
    depends_on: tuple[str, ...] = ()
    apply_result: ApplyResult = ApplyResult.NONE
    timeout_override_ms: int | None = None

    def to_doc(self) -> dict:
        return {
            "step_id": self.step_id,
            "service_name": self.service_name,
            "run_order": self.run_order,
            "depends_on": list(self.depends_on),
            "apply_result": self.apply_result.value,
            "timeout_override_ms": self.timeout_override_ms,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RecipeStep":
        return cls(
            step_id=doc["step_id"],
            service_name=doc["service_name"],
            run_order=int(doc["run_order"]),
            depends_on=tuple(doc.get("depends_on", ())),
            apply_result=ApplyResult(doc.get("apply_result", "none")),
            timeout_override_ms=doc.get("timeout_override_ms"),
        )


@dataclass(frozen=True)
class MissionRecipe:
    name: str
    description: str
    steps: tuple[RecipeStep, ...]
    requires_agents: bool = True

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "steps": [s.to_doc() for s in self.steps],
            "requires_agents": self.requires_agents,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "MissionRecipe":
        return cls(
            name=doc["name"],
            description=doc.get("description", ""),
            steps=tuple(RecipeStep.from_doc(s) for s in doc["steps"]),
            requires_agents=bool(doc.get("requires_agents", True)),
        )


@dataclass(frozen=True)
class ServiceRegistration:
    service_name: str
    domain: ServiceDomain
    base_url: str
    api_key: str
    enabled: bool = True
    result_timeout_ms: int = 90_000
    poll_interval_ms: int = 1_000
    subdomain: str | None = None

    def to_doc(self, redact_key: bool = False) -> dict:
        doc = {
            "service_name": self.service_name,
            "domain": self.domain.value,
            "base_url": self.base_url,
            "enabled": self.enabled,
            "result_timeout_ms": self.result_timeout_ms,
            "poll_interval_ms": self.poll_interval_ms,
            "subdomain": self.subdomain,
        }
        if not redact_key:
            doc["api_key"] = self.api_key
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "ServiceRegistration":
        return cls(
            service_name=doc["service_name"],
            domain=ServiceDomain(doc["domain"]),
            base_url=doc["base_url"],
            api_key=doc.get("api_key", ""),
            enabled=bool(doc.get("enabled", True)),
            result_timeout_ms=int(doc.get("result_timeout_ms", 90_000)),
            poll_interval_ms=int(doc.get("poll_interval_ms", 1_000)),
            subdomain=doc.get("subdomain"),
        )


@dataclass(frozen=True)
class StepResult:
    step_id: str
    service_name: str
    result: dict
    completed_at: int

    def to_doc(self) -> dict:
        return {
            "step_id": self.step_id,
            "service_name": self.service_name,
            "result": self.result,
            "completed_at": self.completed_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "StepResult":
        return cls(
            step_id=doc["step_id"],
            service_name=doc["service_name"],
            result=doc["result"],
            completed_at=int(doc["completed_at"]),
        )


@dataclass
class MissionRecord:
    mission_id: str
    recipe_name: str
    request: dict
    agent_uuids: list[str]
    status: MissionStatus = MissionStatus.CREATED
    step_results: list[StepResult] = field(default_factory=list)
    assignments: list[str] = field(default_factory=list)
    created_at: int = 0
    updated_at: int = 0
    failure_reason: str | None = None
    # Recipe snapshot pinned at mission start so concurrent recipe edits never
    # change an in-flight plan.
    recipe: MissionRecipe | None = None

    def to_doc(self) -> dict:
        return {
            "mission_id": self.mission_id,
            "recipe_name": self.recipe_name,
            "request": self.request,
            "agent_uuids": list(self.agent_uuids),
            "status": self.status.value,
            "step_results": [r.to_doc() for r in self.step_results],
            "assignments": list(self.assignments),
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "failure_reason": self.failure_reason,
            "recipe": self.recipe.to_doc() if self.recipe else None,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "MissionRecord":
        return cls(
            mission_id=doc["mission_id"],
            recipe_name=doc["recipe_name"],
            request=doc.get("request", {}),
            agent_uuids=list(doc.get("agent_uuids", [])),
            status=MissionStatus(doc["status"]),
            step_results=[StepResult.from_doc(r) for r in doc.get("step_results", [])],
            assignments=list(doc.get("assignments", [])),
            created_at=int(doc.get("created_at", 0)),
            updated_at=int(doc.get("updated_at", 0)),
            failure_reason=doc.get("failure_reason"),
            recipe=MissionRecipe.from_doc(doc["recipe"]) if doc.get("recipe") else None,
        )


@dataclass(frozen=True)
class OperationRequest:
    module: str
    params: dict

    def to_doc(self) -> dict:
        return {"module": self.module, "params": self.params}

    @classmethod
    def from_doc(cls, doc: dict) -> "OperationRequest":
        return cls(module=doc["module"], params=doc.get("params", {}))


@dataclass(frozen=True)
class AssignmentPayload:
    """Ordered steps; operations within one step run concurrently and the
    step completes only when every operation has completed."""

    steps: tuple[tuple[OperationRequest, ...], ...]

    def to_doc(self) -> dict:
        return {
            "steps": [
                {"operations": [op.to_doc() for op in step]} for step in self.steps
            ]
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "AssignmentPayload":
        return cls(
            steps=tuple(
                tuple(OperationRequest.from_doc(op) for op in step.get("operations", ()))
                for step in doc.get("steps", ())
            )
        )


@dataclass
class Assignment:
    assignment_id: str
    mission_id: str
    agent_uuid: str
    payload: dict
    status: AssignmentStatus = AssignmentStatus.TO_DISPATCH
    dispatched_at: int | None = None

    def to_doc(self) -> dict:
        return {
            "assignment_id": self.assignment_id,
            "mission_id": self.mission_id,
            "agent_uuid": self.agent_uuid,
            "payload": self.payload,
            "status": self.status.value,
            "dispatched_at": self.dispatched_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Assignment":
        return cls(
            assignment_id=doc["assignment_id"],
            mission_id=doc["mission_id"],
            agent_uuid=doc["agent_uuid"],
            payload=doc.get("payload", {}),
            status=AssignmentStatus(doc["status"]),
            dispatched_at=doc.get("dispatched_at"),
        )


@dataclass(frozen=True)
class MapObject:
    object_id: str
    object_type: str
    geometry: tuple[tuple[float, float], ...]
    metadata: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "object_id": self.object_id,
            "object_type": self.object_type,
            "geometry": [{"x": x, "y": y} for x, y in self.geometry],
            "metadata": self.metadata,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "MapObject":
        return cls(
            object_id=doc["object_id"],
            object_type=doc["object_type"],
            geometry=tuple((float(p["x"]), float(p["y"])) for p in doc["geometry"]),
            metadata=doc.get("metadata", {}),
        )


@dataclass(frozen=True)
class SensorReport:
    agent_uuid: str
    ts: int
    pose: Pose
    battery_pct: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "agent_uuid": self.agent_uuid,
            "ts": self.ts,
            "pose": self.pose.to_doc(),
            "battery_pct": self.battery_pct,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SensorReport":
        return cls(
            agent_uuid=doc["agent_uuid"],
            ts=int(doc["ts"]),
            pose=Pose.from_doc(doc["pose"]),
            battery_pct=doc.get("battery_pct"),
            diagnostics=doc.get("diagnostics", {}),
        )


class EventKind(str, Enum):
    MISSION_CREATED = "mission_created"
    MISSION_STATUS_CHANGED = "mission_status_changed"
    STEP_DISPATCHED = "step_dispatched"
    STEP_COMPLETED = "step_completed"
    MAP_UPDATED = "map_updated"
    AGENT_CHECKED_IN = "agent_checked_in"
    AGENT_STATUS_CHANGED = "agent_status_changed"
    SENSOR_RECEIVED = "sensor_received"
    ASSIGNMENT_STATUS_CHANGED = "assignment_status_changed"
    SERVICE_REGISTERED = "service_registered"
    SERVICE_UPDATED = "service_updated"
    RECIPE_UPSERTED = "recipe_upserted"


@dataclass(frozen=True)
class DomainEvent:
    event_id: str
    kind: EventKind
    subject_id: str
    body: dict
    ts: int

    def to_doc(self) -> dict:
        return {
            "event_id": self.event_id,
            "kind": self.kind.value,
            "subject_id": self.subject_id,
            "body": self.body,
            "ts": self.ts,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DomainEvent":
        return cls(
            event_id=doc["event_id"],
            kind=EventKind(doc["kind"]),
            subject_id=doc["subject_id"],
            body=doc.get("body", {}),
            ts=int(doc["ts"]),
        )
