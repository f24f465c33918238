"""Tower state: agent registry, missions, yard map, catalog, sensor log.

All durable state lives here, mutated under one writer lock and recorded as
DomainEvents. Every committed event is appended to the journal (sensor
reports are sampled), mirrored on the broker as ``event.<kind>`` for live
broadcast, and replayable: recovery loads the latest snapshot and re-applies
the journal tail through the same ``_apply`` switch that served the live run,
so replayed state is identical to the original for every journaled field.
"""
from __future__ import annotations

import re
import threading
from collections import deque
from pathlib import Path

from .broker import Broker, Envelope, keys
from .clock import Clock
from .errors import YardError
from .journal import (
    CorruptJournal,
    JournalEntry,
    JournalWriter,
    SnapshotMismatch,
    read_journal,
    read_snapshot,
    write_snapshot,
)
from .model import (
    AgentClass,
    AgentRecord,
    AgentStatus,
    Assignment,
    AssignmentStatus,
    Connection,
    DomainEvent,
    EventKind,
    Geometry,
    MapObject,
    MissionRecipe,
    MissionRecord,
    MissionStatus,
    SensorReport,
    ServiceRegistration,
    StepResult,
    new_id,
)

_UUID_SEGMENT = re.compile(r"^[a-z0-9_-]+$")

# Event kinds whose loss would break mission tracking; these force an fsync.
_FSYNC_KINDS = {
    EventKind.MISSION_CREATED,
    EventKind.MISSION_STATUS_CHANGED,
    EventKind.ASSIGNMENT_STATUS_CHANGED,
}


class AuthFailed(YardError):
    pass


class MalformedIdentity(YardError):
    pass


class UnknownAgent(YardError):
    pass


class UnknownMission(YardError):
    pass


class AlreadyTerminal(YardError):
    pass


class InvalidGeometry(YardError):
    pass


class UnknownObjectId(YardError):
    pass


class AgentUnavailable(YardError):
    def __init__(self, agent_uuid: str, why: str = "not free"):
        self.agent_uuid = agent_uuid
        super().__init__(f"agent {agent_uuid} unavailable: {why}")


class AgentOffline(YardError):
    def __init__(self, agent_uuid: str):
        self.agent_uuid = agent_uuid
        super().__init__(f"agent {agent_uuid} is offline")


class StateStore:
    def __init__(
        self,
        data_dir: str | Path | None = None,
        broker: Broker | None = None,
        clock: Clock | None = None,
        *,
        agent_token: str = "agent-secret",
        sensor_ring_size: int = 1000,
        sensor_journal_every: int = 10,
        snapshot_every: int = 1000,
    ):
        self._lock = threading.RLock()
        self._broker = broker
        self._clock = clock or Clock()
        self._agent_token = agent_token
        self._ring_size = sensor_ring_size
        self._sensor_every = sensor_journal_every
        self._snapshot_every = snapshot_every

        self.agents: dict[str, AgentRecord] = {}
        self.missions: dict[str, MissionRecord] = {}
        self.assignments: dict[str, Assignment] = {}
        self.recipes: dict[str, MissionRecipe] = {}
        self.services: dict[str, ServiceRegistration] = {}
        self.map_objects: dict[str, MapObject] = {}
        self.revision = 0
        self.seq = 0

        self._sensor_rings: dict[str, deque] = {}
        self._sensor_counts: dict[str, int] = {}

        self._journal: JournalWriter | None = None
        self._snapshot_path: Path | None = None
        if data_dir is not None:
            data_dir = Path(data_dir)
            self._snapshot_path = data_dir / "state.json"
            journal_path = data_dir / "events.jsonl"
            self._recover(journal_path)
            self._journal = JournalWriter(journal_path)

    # ------------------------------------------------------------------
    # commit machinery

    def _commit(self, kind: EventKind, subject_id: str, body: dict, journal: bool = True) -> DomainEvent:
        """Apply, journal, and broadcast one event. Caller holds the lock."""
        event = DomainEvent(
            event_id=new_id(), kind=kind, subject_id=subject_id, body=body, ts=self._clock.now_ms()
        )
        self._apply(event)
        if self._journal is not None and journal:
            self.seq += 1
            self._journal.append(JournalEntry(self.seq, event), fsync=kind in _FSYNC_KINDS)
            if self._snapshot_every and self.seq % self._snapshot_every == 0:
                write_snapshot(self._snapshot_path, self.seq, self._state_doc())
        elif self._journal is None and journal:
            self.seq += 1
        if self._broker is not None:
            self._broker.publish(
                Envelope(routing_key=keys.event(kind), msg_type="event", body=event.to_doc())
            )
        return event

    def _apply(self, event: DomainEvent) -> None:
        kind, body = event.kind, event.body
        if kind is EventKind.AGENT_CHECKED_IN:
            record = AgentRecord.from_doc(body["record"])
            self.agents[record.agent_uuid] = record
        elif kind is EventKind.AGENT_STATUS_CHANGED:
            rec = self.agents[body["agent_uuid"]]
            rec.status = AgentStatus(body["status"])
            rec.connection = Connection(body["connection"])
            rec.reserved_by = body.get("reserved_by")
        elif kind is EventKind.SENSOR_RECEIVED:
            report = SensorReport.from_doc(body)
            rec = self.agents[report.agent_uuid]
            rec.pose = report.pose
            rec.last_seen = report.ts
            ring = self._sensor_rings.setdefault(report.agent_uuid, deque(maxlen=self._ring_size))
            ring.append(report)
        elif kind is EventKind.MISSION_CREATED:
            mission = MissionRecord.from_doc(body["mission"])
            self.missions[mission.mission_id] = mission
        elif kind is EventKind.MISSION_STATUS_CHANGED:
            mission = self.missions[body["mission_id"]]
            mission.status = MissionStatus(body["status"])
            mission.failure_reason = body.get("failure_reason") or mission.failure_reason
            mission.updated_at = event.ts
        elif kind is EventKind.STEP_DISPATCHED:
            pass  # journal marker only; carries no state
        elif kind is EventKind.STEP_COMPLETED:
            mission = self.missions[body["mission_id"]]
            mission.step_results.append(StepResult.from_doc(body["step_result"]))
            mission.updated_at = event.ts
        elif kind is EventKind.ASSIGNMENT_STATUS_CHANGED:
            assignment_id = body["assignment_id"]
            existing = self.assignments.get(assignment_id)
            if existing is None:
                assignment = Assignment(
                    assignment_id=assignment_id,
                    mission_id=body["mission_id"],
                    agent_uuid=body["agent_uuid"],
                    payload=body.get("payload", {}),
                    status=AssignmentStatus(body["status"]),
                    dispatched_at=body.get("dispatched_at"),
                )
                self.assignments[assignment_id] = assignment
                mission = self.missions.get(assignment.mission_id)
                if mission is not None and assignment_id not in mission.assignments:
                    mission.assignments.append(assignment_id)
            else:
                existing.status = AssignmentStatus(body["status"])
                if body.get("dispatched_at") is not None:
                    existing.dispatched_at = body["dispatched_at"]
        elif kind is EventKind.MAP_UPDATED:
            for doc in body.get("update", []):
                obj = MapObject.from_doc(doc)
                self.map_objects[obj.object_id] = obj
            for object_id in body.get("delete", []):
                self.map_objects.pop(object_id, None)
            self.revision = body["revision"]
        elif kind is EventKind.SERVICE_REGISTERED:
            reg = ServiceRegistration.from_doc(body["registration"])
            self.services[reg.service_name] = reg
        elif kind is EventKind.SERVICE_UPDATED:
            name = body["service_name"]
            if body.get("removed"):
                self.services.pop(name, None)
            elif name in self.services:
                self.services[name] = ServiceRegistration.from_doc(
                    {**self.services[name].to_doc(), "enabled": body["enabled"]}
                )
        elif kind is EventKind.RECIPE_UPSERTED:
            if body.get("removed"):
                self.recipes.pop(body["name"], None)
            else:
                recipe = MissionRecipe.from_doc(body["recipe"])
                self.recipes[recipe.name] = recipe

    # ------------------------------------------------------------------
    # recovery

    def _recover(self, journal_path: Path) -> None:
        snap = read_snapshot(self._snapshot_path) if self._snapshot_path else None
        if snap is not None:
            self.seq, state = snap
            self._load_state(state)
        entries = read_journal(journal_path)
        if snap is not None and entries and entries[-1].seq < self.seq:
            raise SnapshotMismatch(
                f"snapshot at seq {self.seq} is ahead of journal end {entries[-1].seq}"
            )
        if snap is not None and not entries and self.seq > 0:
            raise SnapshotMismatch(f"snapshot at seq {self.seq} but journal is empty")
        for entry in entries:
            if entry.seq <= self.seq:
                continue
            if entry.seq != self.seq + 1:
                raise CorruptJournal(self.seq + 1, f"gap: next entry has seq {entry.seq}")
            self._apply(entry.event)
            self.seq = entry.seq

    def _state_doc(self) -> dict:
        return {
            "agents": [a.to_doc() for a in self.agents.values()],
            "missions": [m.to_doc() for m in self.missions.values()],
            "assignments": [a.to_doc() for a in self.assignments.values()],
            "recipes": [r.to_doc() for r in self.recipes.values()],
            "services": [s.to_doc() for s in self.services.values()],
            "map_objects": [o.to_doc() for o in self.map_objects.values()],
            "revision": self.revision,
        }

    def _load_state(self, state: dict) -> None:
        self.agents = {d["agent_uuid"]: AgentRecord.from_doc(d) for d in state.get("agents", [])}
        self.missions = {d["mission_id"]: MissionRecord.from_doc(d) for d in state.get("missions", [])}
        self.assignments = {
            d["assignment_id"]: Assignment.from_doc(d) for d in state.get("assignments", [])
        }
        self.recipes = {d["name"]: MissionRecipe.from_doc(d) for d in state.get("recipes", [])}
        self.services = {
            d["service_name"]: ServiceRegistration.from_doc(d) for d in state.get("services", [])
        }
        self.map_objects = {
            d["object_id"]: MapObject.from_doc(d) for d in state.get("map_objects", [])
        }
        self.revision = state.get("revision", 0)

    def close(self) -> None:
        with self._lock:
            if self._journal is not None:
                self._journal.close()
                self._journal = None

    # ------------------------------------------------------------------
    # agents

    def check_in(self, identity: dict, token: str) -> AgentRecord:
        """Create or reconnect an agent. Returning agents keep their status
        and any reservation so an in-flight mission survives the reconnect."""
        if token != self._agent_token:
            raise AuthFailed("bad agent token")
        try:
            agent_uuid = identity["agent_uuid"]
            name = identity["name"]
            agent_class = AgentClass(identity.get("agent_class", "vehicle"))
            geometry = Geometry.from_doc(identity["geometry"])
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedIdentity(str(exc)) from None
        if not isinstance(agent_uuid, str) or not _UUID_SEGMENT.match(agent_uuid):
            raise MalformedIdentity(f"agent_uuid {agent_uuid!r} must match [a-z0-9_-]+")
        with self._lock:
            existing = self.agents.get(agent_uuid)
            if existing is None:
                record = AgentRecord(
                    agent_uuid=agent_uuid,
                    name=name,
                    agent_class=agent_class,
                    geometry=geometry,
                    status=AgentStatus.FREE,
                    connection=Connection.ONLINE,
                    last_seen=self._clock.now_ms(),
                )
            else:
                record = AgentRecord(
                    agent_uuid=agent_uuid,
                    name=name,
                    agent_class=agent_class,
                    geometry=geometry,
                    status=existing.status,
                    pose=existing.pose,
                    connection=Connection.ONLINE,
                    reserved_by=existing.reserved_by,
                    last_seen=self._clock.now_ms(),
                )
            self._commit(
                EventKind.AGENT_CHECKED_IN,
                agent_uuid,
                {"record": record.to_doc(), "reconnect": existing is not None},
            )
            return self.agents[agent_uuid]

    def ingest_sensor(self, report: SensorReport) -> bool:
        """True if accepted, False if dropped as stale. Accepted reports are
        broadcast immediately; only every Nth lands in the journal."""
        with self._lock:
            rec = self.agents.get(report.agent_uuid)
            if rec is None:
                raise UnknownAgent(report.agent_uuid)
            ring = self._sensor_rings.get(report.agent_uuid)
            if ring and ring[-1].ts > report.ts:
                return False
            count = self._sensor_counts.get(report.agent_uuid, 0) + 1
            self._sensor_counts[report.agent_uuid] = count
            sampled = self._sensor_every <= 1 or count % self._sensor_every == 1
            self._commit(EventKind.SENSOR_RECEIVED, report.agent_uuid, report.to_doc(), journal=sampled)
            return True

    def sensor_log(self, agent_uuid: str) -> list[SensorReport]:
        with self._lock:
            return list(self._sensor_rings.get(agent_uuid, ()))

    def set_agent_connection(self, agent_uuid: str, connection: Connection) -> None:
        with self._lock:
            rec = self.agents.get(agent_uuid)
            if rec is None or rec.connection is connection:
                return
            self._commit(
                EventKind.AGENT_STATUS_CHANGED,
                agent_uuid,
                {
                    "agent_uuid": agent_uuid,
                    "status": rec.status.value,
                    "connection": connection.value,
                    "reserved_by": rec.reserved_by,
                },
            )

    def apply_agent_report(self, agent_uuid: str, status: AgentStatus) -> AgentRecord:
        """Agent-reported status is authoritative; the tower records it."""
        with self._lock:
            rec = self.agents.get(agent_uuid)
            if rec is None:
                raise UnknownAgent(agent_uuid)
            if rec.status is status and rec.connection is Connection.ONLINE:
                return rec
            reserved_by = rec.reserved_by if status is not AgentStatus.FREE else None
            self._commit(
                EventKind.AGENT_STATUS_CHANGED,
                agent_uuid,
                {
                    "agent_uuid": agent_uuid,
                    "status": status.value,
                    "connection": Connection.ONLINE.value,
                    "reserved_by": reserved_by,
                },
            )
            return rec

    def _check_reservable(self, agent_uuids: list[str]) -> None:
        for agent_uuid in agent_uuids:
            rec = self.agents.get(agent_uuid)
            if rec is None:
                raise UnknownAgent(agent_uuid)
            if rec.connection is Connection.OFFLINE:
                raise AgentOffline(agent_uuid)
            if not rec.reservable:
                raise AgentUnavailable(agent_uuid, f"status={rec.status.value}")

    def reserve_agents(self, mission_id: str, agent_uuids: list[str]) -> None:
        """Atomically reserve all named agents or none."""
        with self._lock:
            self._check_reservable(agent_uuids)
            for agent_uuid in agent_uuids:
                rec = self.agents[agent_uuid]
                self._commit(
                    EventKind.AGENT_STATUS_CHANGED,
                    agent_uuid,
                    {
                        "agent_uuid": agent_uuid,
                        "status": rec.status.value,
                        "connection": rec.connection.value,
                        "reserved_by": mission_id,
                    },
                )

    def release_agent(self, agent_uuid: str) -> None:
        with self._lock:
            rec = self.agents.get(agent_uuid)
            if rec is None or rec.reserved_by is None:
                return
            self._commit(
                EventKind.AGENT_STATUS_CHANGED,
                agent_uuid,
                {
                    "agent_uuid": agent_uuid,
                    "status": rec.status.value,
                    "connection": rec.connection.value,
                    "reserved_by": None,
                },
            )

    # ------------------------------------------------------------------
    # yard map

    def commit_map_delta(self, update: list[MapObject], delete: list[str]) -> int:
        """Apply a map delta atomically; returns the new revision. An empty
        delta is a no-op and does not bump the revision."""
        with self._lock:
            if not update and not delete:
                return self.revision
            for obj in update:
                if len(obj.geometry) < 3:
                    raise InvalidGeometry(
                        f"object {obj.object_id!r}: polygon needs >= 3 vertices"
                    )
            for object_id in delete:
                if object_id not in self.map_objects:
                    raise UnknownObjectId(object_id)
            self._commit(
                EventKind.MAP_UPDATED,
                f"rev-{self.revision + 1}",
                {
                    "update": [o.to_doc() for o in update],
                    "delete": list(delete),
                    "revision": self.revision + 1,
                },
            )
            return self.revision

    def yard_state(self) -> dict:
        """Snapshot of the yard in the shape appended to service requests."""
        with self._lock:
            return {
                "revision": self.revision,
                "map_objects": [o.to_doc() for o in self.map_objects.values()],
                "agents": [
                    {
                        "agent_uuid": a.agent_uuid,
                        "pose": a.pose.to_doc() if a.pose else None,
                        "geometry": a.geometry.to_doc(),
                        "status": a.status.value,
                    }
                    for a in self.agents.values()
                ],
            }

    # ------------------------------------------------------------------
    # missions and assignments

    def create_mission(
        self,
        recipe_name: str,
        request: dict,
        agent_uuids: list[str],
        recipe: MissionRecipe,
        reserve: bool = False,
    ) -> MissionRecord:
        """Create a mission; with ``reserve`` the named agents are reserved
        in the same lock scope so no concurrent mission can race them away
        between the availability check and the reservation."""
        with self._lock:
            if reserve:
                self._check_reservable(agent_uuids)
            now = self._clock.now_ms()
            mission = MissionRecord(
                mission_id=new_id(),
                recipe_name=recipe_name,
                request=request,
                agent_uuids=list(agent_uuids),
                status=MissionStatus.CREATED,
                created_at=now,
                updated_at=now,
                recipe=recipe,
            )
            self._commit(EventKind.MISSION_CREATED, mission.mission_id, {"mission": mission.to_doc()})
            if reserve:
                self.reserve_agents(mission.mission_id, agent_uuids)
            return self.missions[mission.mission_id]

    def get_mission(self, mission_id: str) -> MissionRecord:
        with self._lock:
            mission = self.missions.get(mission_id)
            if mission is None:
                raise UnknownMission(mission_id)
            return mission

    def set_mission_status(
        self, mission_id: str, status: MissionStatus, failure_reason: str | None = None
    ) -> None:
        with self._lock:
            mission = self.get_mission(mission_id)
            if mission.status.terminal:
                raise AlreadyTerminal(f"mission {mission_id} is {mission.status.value}")
            self._commit(
                EventKind.MISSION_STATUS_CHANGED,
                mission_id,
                {"mission_id": mission_id, "status": status.value, "failure_reason": failure_reason},
            )

    def mark_step_dispatched(self, mission_id: str, step_id: str, service_name: str) -> None:
        with self._lock:
            self._commit(
                EventKind.STEP_DISPATCHED,
                mission_id,
                {"mission_id": mission_id, "step_id": step_id, "service_name": service_name},
            )

    def add_step_result(self, mission_id: str, step_result: StepResult) -> None:
        with self._lock:
            self.get_mission(mission_id)
            self._commit(
                EventKind.STEP_COMPLETED,
                mission_id,
                {"mission_id": mission_id, "step_result": step_result.to_doc()},
            )

    def create_assignment(self, assignment: Assignment) -> Assignment:
        """Idempotent on assignment_id: recovery re-renders deterministic ids
        and must never produce a second record for the same triple."""
        with self._lock:
            existing = self.assignments.get(assignment.assignment_id)
            if existing is not None:
                return existing
            self._commit(
                EventKind.ASSIGNMENT_STATUS_CHANGED,
                assignment.assignment_id,
                assignment.to_doc(),
            )
            return self.assignments[assignment.assignment_id]

    def set_assignment_status(
        self, assignment_id: str, status: AssignmentStatus, dispatched_at: int | None = None
    ) -> Assignment:
        with self._lock:
            assignment = self.assignments[assignment_id]
            self._commit(
                EventKind.ASSIGNMENT_STATUS_CHANGED,
                assignment_id,
                {
                    "assignment_id": assignment_id,
                    "mission_id": assignment.mission_id,
                    "agent_uuid": assignment.agent_uuid,
                    "status": status.value,
                    "dispatched_at": dispatched_at,
                },
            )
            return assignment

    # ------------------------------------------------------------------
    # catalog (driven by the service registry)

    def put_service(self, registration: ServiceRegistration) -> None:
        with self._lock:
            self._commit(
                EventKind.SERVICE_REGISTERED,
                registration.service_name,
                {"registration": registration.to_doc()},
            )

    def set_service_enabled(self, service_name: str, enabled: bool) -> None:
        with self._lock:
            self._commit(
                EventKind.SERVICE_UPDATED,
                service_name,
                {"service_name": service_name, "enabled": enabled},
            )

    def remove_service(self, service_name: str) -> None:
        with self._lock:
            self._commit(
                EventKind.SERVICE_UPDATED,
                service_name,
                {"service_name": service_name, "removed": True},
            )

    def put_recipe(self, recipe: MissionRecipe) -> None:
        with self._lock:
            self._commit(EventKind.RECIPE_UPSERTED, recipe.name, {"recipe": recipe.to_doc()})

    def remove_recipe(self, name: str) -> None:
        with self._lock:
            self._commit(EventKind.RECIPE_UPSERTED, name, {"name": name, "removed": True})

    # ------------------------------------------------------------------
    # snapshot-style reads

    def list_agents(self, status: AgentStatus | None = None) -> list[AgentRecord]:
        with self._lock:
            agents = sorted(self.agents.values(), key=lambda a: a.agent_uuid)
        if status is not None:
            agents = [a for a in agents if a.status is status]
        return agents

    def list_missions(self, status: MissionStatus | None = None) -> list[MissionRecord]:
        with self._lock:
            missions = sorted(self.missions.values(), key=lambda m: m.mission_id)
        if status is not None:
            missions = [m for m in missions if m.status is status]
        return missions

    def mission_assignments(self, mission_id: str) -> list[Assignment]:
        with self._lock:
            mission = self.get_mission(mission_id)
            return [self.assignments[a] for a in mission.assignments if a in self.assignments]
