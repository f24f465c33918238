"""Mission engine.

Drives each mission through its lifecycle: reserves the named agents and
waits for them to report ready, executes the pinned recipe's step groups
against the registered microservices (equal run_orders dispatch together and
the group completes when every step has), enforces the domain permission
matrix on every response, applies map deltas, renders planner output into
per-agent assignments, dispatches them over the broker, and tracks agent
reports until the mission terminates. Any step failure fails the whole
mission; the only retries anywhere are the transient-poll retries inside the
job poller.
"""
from __future__ import annotations

import logging
import queue
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass, field

from ..broker import Broker, Envelope, SubscriptionClosed, keys
from ..clock import Clock
from ..errors import YardError
from ..model import (
    AgentStatus,
    ApplyResult,
    Assignment,
    AssignmentStatus,
    MapObject,
    MissionEvent,
    MissionRecord,
    MissionStatus,
    RecipeStep,
    SensorReport,
    ServiceDomain,
    StepResult,
    transition_mission,
)
from ..registry import PERMISSION_MATRIX, ServiceRegistry, check_effect
from ..store import AlreadyTerminal, StateStore, UnknownMission
from .jobs import JobFailed, JobTimeout, PollPolicy, ServiceClient, ServiceJob, ServiceRejected, ServiceUnreachable

log = logging.getLogger(__name__)

# Deterministic assignment ids: recovery re-renders the same triple to the
# same id, so re-publishing can never mint a duplicate.
_ASSIGNMENT_NS = uuid.UUID("2d0c7e6e-5a8e-4bb0-9f1f-4a1d28c6a0c4")


class UnknownRecipe(YardError):
    pass


class RecipeDegraded(YardError):
    pass


class RecipeRequiresAgents(YardError):
    pass


class PermissionViolation(YardError):
    def __init__(self, effect: str, domain: ServiceDomain):
        self.effect = effect
        self.domain = domain
        super().__init__(f"domain {domain.value} may not {effect}")


class UnknownAgentInResult(YardError):
    pass


class AgentNotReady(YardError):
    pass


class EmptyAssignmentList(YardError):
    pass


class _MissionCanceled(Exception):
    """Internal control flow: a cancel request interrupted the worker."""


class _Abandoned(Exception):
    """Internal control flow: the orchestrator is shutting down; the worker
    exits without journaling any outcome, leaving the mission exactly where
    a crash would have left it (recovery decides what happens next)."""


def assignment_id_for(mission_id: str, step_id: str, agent_uuid: str, index: int) -> str:
    return str(uuid.uuid5(_ASSIGNMENT_NS, f"{mission_id}|{step_id}|{agent_uuid}|{index}"))


def response_effects(apply_result: ApplyResult, result: dict) -> set[str]:
    """Data-flow effects a step response would exert on the yard: declared
    apply semantics plus any effect sections smuggled into the result body."""
    effects: set[str] = set()
    if apply_result is ApplyResult.MAP_WRITE or "map_update" in result:
        effects.add("write_map")
    if apply_result is ApplyResult.ASSIGNMENT_SOURCE or "assignments" in result:
        effects.add("target_agent")
    return effects


def enforce_response_effects(domain: ServiceDomain, effects: set[str]) -> None:
    """Raise PermissionViolation for the first effect the domain lacks."""
    for effect in sorted(effects):
        if not check_effect(domain, effect):
            raise PermissionViolation(effect, domain)


def build_request_document(
    mission: MissionRecord,
    step: RecipeStep,
    dependencies: list[StepResult],
    yard_state: dict | None,
    agents: list[dict],
) -> dict:
    return {
        "mission_id": mission.mission_id,
        "step_id": step.step_id,
        "request": mission.request,
        "context": {
            "yard_state": yard_state,
            "agents": agents,
            "dependencies": [r.to_doc() for r in dependencies],
        },
    }


@dataclass
class OrchestratorConfig:
    reserve_timeout_ms: int = 30_000
    cancel_grace_ms: int = 10_000
    http_timeout_s: float = 10.0


@dataclass
class _MissionRuntime:
    mission_id: str
    agents_ready: threading.Event = field(default_factory=threading.Event)
    cancel: threading.Event = field(default_factory=threading.Event)


class Orchestrator:
    def __init__(
        self,
        store: StateStore,
        registry: ServiceRegistry,
        broker: Broker,
        clock: Clock | None = None,
        config: OrchestratorConfig | None = None,
    ):
        self.store = store
        self.registry = registry
        self.broker = broker
        self.clock = clock or Clock()
        self.config = config or OrchestratorConfig()
        self.client = ServiceClient(timeout_s=self.config.http_timeout_s)
        self._runtimes: dict[str, _MissionRuntime] = {}
        self._runtimes_lock = threading.Lock()
        self._shutdown = threading.Event()
        self._consumer: threading.Thread | None = None
        self._workers: list[threading.Thread] = []

    # ------------------------------------------------------------------
    # lifecycle

    def start(self) -> "Orchestrator":
        self._consumer = threading.Thread(target=self._consume_agent_traffic, daemon=True)
        self._consumer.start()
        self._resume_recovered_missions()
        return self

    def stop(self) -> None:
        self._shutdown.set()
        if self._consumer is not None:
            self._consumer.join(timeout=5)
        for worker in self._workers:
            worker.join(timeout=5)
        self.client.close()

    # ------------------------------------------------------------------
    # public operations

    def start_mission(self, recipe_name: str, request: dict, agent_uuids: list[str]) -> str:
        recipe = self.registry.get_recipe(recipe_name)
        if recipe is None:
            raise UnknownRecipe(recipe_name)
        if self.registry.is_degraded(recipe):
            raise RecipeDegraded(recipe_name)
        if recipe.requires_agents and not agent_uuids:
            raise RecipeRequiresAgents(recipe_name)
        mission = self.store.create_mission(
            recipe_name, request, agent_uuids, recipe, reserve=recipe.requires_agents
        )
        runtime = _MissionRuntime(mission.mission_id)
        with self._runtimes_lock:
            self._runtimes[mission.mission_id] = runtime
        worker = threading.Thread(
            target=self._run_mission, args=(mission.mission_id,), daemon=True
        )
        self._workers.append(worker)
        worker.start()
        return mission.mission_id

    def cancel_mission(self, mission_id: str) -> None:
        mission = self.store.get_mission(mission_id)
        if mission.status.terminal:
            raise AlreadyTerminal(mission_id)
        runtime = self._runtime(mission_id)
        runtime.cancel.set()
        if mission.status in (MissionStatus.DISPATCHING, MissionStatus.EXECUTING):
            self._publish_cancel_actions(mission)
            grace = threading.Thread(
                target=self._cancel_grace_watch, args=(mission_id,), daemon=True
            )
            grace.start()

    # ------------------------------------------------------------------
    # mission worker

    def _runtime(self, mission_id: str) -> _MissionRuntime:
        with self._runtimes_lock:
            runtime = self._runtimes.get(mission_id)
            if runtime is None:
                runtime = _MissionRuntime(mission_id)
                self._runtimes[mission_id] = runtime
            return runtime

    def _run_mission(self, mission_id: str) -> None:
        mission = self.store.get_mission(mission_id)
        runtime = self._runtime(mission_id)
        try:
            requires_agents = bool(mission.recipe and mission.recipe.requires_agents)
            status = transition_mission(
                mission.status, MissionEvent.START, requires_agents=requires_agents
            )
            self.store.set_mission_status(mission_id, status)

            if status is MissionStatus.RESERVING:
                self._reserve_and_wait(mission, runtime)
                self.store.set_mission_status(
                    mission_id, transition_mission(MissionStatus.RESERVING, MissionEvent.AGENTS_READY)
                )

            rendered = self._execute_plan(mission, runtime)

            produced = bool(rendered)
            status = transition_mission(
                MissionStatus.PLANNING, MissionEvent.ALL_STEPS_DONE, produced_assignments=produced
            )
            self.store.set_mission_status(mission_id, status)
            if not produced:
                self._release_all(mission)
                return

            self._dispatch_assignments(mission)
            # completion is event-driven from agent reports; the re-check
            # guards the edge where every report already arrived
            self._check_mission_completion(mission_id)
        except _Abandoned:
            return
        except _MissionCanceled:
            self._finalize_cancel(mission_id)
        except YardError as exc:
            self._fail_mission(mission_id, f"{type(exc).__name__}: {exc}")
        except Exception:
            log.exception("mission %s worker crashed", mission_id)
            self._fail_mission(mission_id, "internal error")

    def _reserve_and_wait(self, mission: MissionRecord, runtime: _MissionRuntime) -> None:
        for agent_uuid in mission.agent_uuids:
            self._publish_action(agent_uuid, "reserve", mission.mission_id)
        self._recheck_reservation(mission.mission_id)
        deadline = self.clock.monotonic_ms() + self.config.reserve_timeout_ms
        while not runtime.agents_ready.wait(timeout=0.05):
            if self._shutdown.is_set():
                raise _Abandoned()
            if runtime.cancel.is_set():
                raise _MissionCanceled()
            if self.clock.monotonic_ms() > deadline:
                raise YardError(
                    f"AgentUnavailable: agents not ready within {self.config.reserve_timeout_ms} ms"
                )

    def _execute_plan(self, mission: MissionRecord, runtime: _MissionRuntime) -> list[Assignment]:
        recipe = mission.recipe
        assert recipe is not None
        rendered: list[Assignment] = []
        prior: list[StepResult] = []
        for run_order in sorted({s.run_order for s in recipe.steps}):
            if self._shutdown.is_set():
                raise _Abandoned()
            if runtime.cancel.is_set():
                raise _MissionCanceled()
            group = [s for s in recipe.steps if s.run_order == run_order]
            results: list[StepResult] = []
            if len(group) == 1:
                results.append(self._execute_step(mission, group[0], prior, runtime))
            else:
                # dispatch in declaration order, record in completion order
                with ThreadPoolExecutor(max_workers=len(group)) as pool:
                    futures = [
                        pool.submit(self._execute_step, mission, step, list(prior), runtime)
                        for step in group
                    ]
                    wait(futures)
                errors = [f.exception() for f in futures if f.exception() is not None]
                if errors:
                    raise errors[0]
                results.extend(f.result() for f in futures)
            prior.extend(results)
            for step in group:
                if step.apply_result is ApplyResult.ASSIGNMENT_SOURCE:
                    result = next(r for r in results if r.step_id == step.step_id)
                    rendered.extend(self._render_assignments(mission, step, result))
        return rendered

    def _execute_step(
        self,
        mission: MissionRecord,
        step: RecipeStep,
        prior: list[StepResult],
        runtime: _MissionRuntime,
    ) -> StepResult:
        reg = self.registry.get_service(step.service_name)
        perms = PERMISSION_MATRIX[reg.domain]
        if not perms.callable_by_orchestrator:
            raise PermissionViolation("orchestrate", reg.domain)

        by_id = {r.step_id: r for r in prior}
        dependencies = [by_id[dep] for dep in step.depends_on]
        yard = self.store.yard_state() if perms.receives_yard_state else None
        agents = [
            {
                "agent_uuid": a.agent_uuid,
                "pose": a.pose.to_doc() if a.pose else None,
                "geometry": a.geometry.to_doc(),
                "status": a.status.value,
            }
            for a in (self.store.agents[u] for u in mission.agent_uuids)
        ]
        doc = build_request_document(mission, step, dependencies, yard, agents)

        self.store.mark_step_dispatched(mission.mission_id, step.step_id, step.service_name)
        response = self.client.submit(reg, doc)
        status = response.get("status")
        if status == "ready":
            result = response.get("result", {})
        elif status == "failed":
            raise JobFailed(f"step {step.step_id}: {response.get('reason', 'unspecified')}")
        elif status == "pending":
            job = ServiceJob(
                job_token=response["job_id"],
                service_name=step.service_name,
                mission_id=mission.mission_id,
                step_id=step.step_id,
                dispatched_at=self.clock.now_ms(),
            )
            policy = PollPolicy(
                poll_interval_ms=reg.poll_interval_ms,
                result_timeout_ms=step.timeout_override_ms or reg.result_timeout_ms,
            )
            self.client.poll_job(
                job, reg, policy, self.clock,
                should_cancel=lambda: runtime.cancel.is_set() or self._shutdown.is_set(),
            )
            if job.state == "canceled":
                if self._shutdown.is_set() and not runtime.cancel.is_set():
                    raise _Abandoned()
                raise _MissionCanceled()
            if job.state == "timeout":
                raise JobTimeout(f"step {step.step_id} timed out after {policy.result_timeout_ms} ms")
            if job.state == "failed":
                raise JobFailed(f"step {step.step_id}: {job.failure_reason}")
            result = job.result or {}
        else:
            raise ServiceRejected(201, f"unrecognized response status {status!r}")

        enforce_response_effects(reg.domain, response_effects(step.apply_result, result))

        if step.apply_result is ApplyResult.MAP_WRITE:
            update = [MapObject.from_doc(d) for d in result.get("update", [])]
            delete = [str(i) for i in result.get("delete", [])]
            self.store.commit_map_delta(update, delete)
        # storage-domain results are recorded but exert no state effect

        step_result = StepResult(
            step_id=step.step_id,
            service_name=step.service_name,
            result=result,
            completed_at=self.clock.now_ms(),
        )
        self.store.add_step_result(mission.mission_id, step_result)
        return step_result

    def _render_assignments(
        self, mission: MissionRecord, step: RecipeStep, source: StepResult
    ) -> list[Assignment]:
        entries = source.result.get("assignments")
        if not entries:
            raise EmptyAssignmentList(f"step {step.step_id} produced no assignments")
        out: list[Assignment] = []
        for index, entry in enumerate(entries):
            agent_uuid = entry.get("agent_uuid")
            if agent_uuid not in mission.agent_uuids:
                raise UnknownAgentInResult(f"{agent_uuid!r} is not reserved by this mission")
            record = self.store.agents[agent_uuid]
            if record.status is not AgentStatus.READY:
                raise AgentNotReady(f"{agent_uuid} is {record.status.value}")
            assignment = Assignment(
                assignment_id=assignment_id_for(mission.mission_id, step.step_id, agent_uuid, index),
                mission_id=mission.mission_id,
                agent_uuid=agent_uuid,
                payload=entry.get("payload", {}),
            )
            out.append(self.store.create_assignment(assignment))
        return out

    def _dispatch_assignments(self, mission: MissionRecord) -> None:
        """Write-ahead dispatch: journal every assignment as dispatched and
        the mission as executing, then hand the envelopes to the broker.
        A crash between the journal write and the publish is repaired by the
        idempotent re-publish on recovery, and no agent report can ever race
        ahead of the state it refers to."""
        pending = [
            a
            for a in self.store.mission_assignments(mission.mission_id)
            if a.status in (AssignmentStatus.TO_DISPATCH, AssignmentStatus.DISPATCHED)
        ]
        for assignment in pending:
            record = self.store.agents[assignment.agent_uuid]
            if record.status is not AgentStatus.READY:
                raise AgentNotReady(
                    f"{assignment.agent_uuid} is {record.status.value} at dispatch time"
                )
        now = self.clock.now_ms()
        for assignment in pending:
            self.store.set_assignment_status(
                assignment.assignment_id, AssignmentStatus.DISPATCHED, dispatched_at=now
            )
        try:
            self.store.set_mission_status(
                mission.mission_id,
                transition_mission(MissionStatus.DISPATCHING, MissionEvent.ALL_DISPATCHED),
            )
        except AlreadyTerminal:
            return
        for assignment in pending:
            self.broker.publish(
                Envelope(
                    routing_key=keys.assignment(assignment.agent_uuid),
                    msg_type="assignment",
                    body={
                        "assignment_id": assignment.assignment_id,
                        "mission_id": mission.mission_id,
                        "payload": assignment.payload,
                    },
                )
            )

    # ------------------------------------------------------------------
    # broker consumption

    def _consume_agent_traffic(self) -> None:
        sub = self.broker.subscribe(keys.ALL_AGENT_TRAFFIC)
        try:
            while not self._shutdown.is_set():
                try:
                    envelope = sub.get(timeout=0.25)
                except queue.Empty:
                    continue
                except SubscriptionClosed:
                    return
                try:
                    self._route_agent_envelope(envelope)
                except Exception:
                    log.exception("error handling %s", envelope.routing_key)
        finally:
            sub.close()

    def _route_agent_envelope(self, envelope: Envelope) -> None:
        parts = envelope.routing_key.split(".")
        if len(parts) != 3 or parts[0] != "agent":
            return
        agent_uuid, kind = parts[1], parts[2]
        body = envelope.body
        if kind == "checkin":
            identity = {k: v for k, v in body.items() if k != "token"}
            self.store.check_in(identity, body.get("token", ""))
        elif kind == "sensors":
            self.store.ingest_sensor(SensorReport.from_doc({**body, "agent_uuid": agent_uuid}))
        elif kind == "state":
            if "assignment_id" in body:
                self._handle_assignment_status(body)
            elif "status" in body:
                self.store.apply_agent_report(agent_uuid, AgentStatus(body["status"]))
                self._recheck_all_reservations()

    def _recheck_all_reservations(self) -> None:
        with self._runtimes_lock:
            pending = [r.mission_id for r in self._runtimes.values() if not r.agents_ready.is_set()]
        for mission_id in pending:
            self._recheck_reservation(mission_id)

    def _recheck_reservation(self, mission_id: str) -> None:
        try:
            mission = self.store.get_mission(mission_id)
        except UnknownMission:
            return
        if mission.status is not MissionStatus.RESERVING and mission.status is not MissionStatus.CREATED:
            # runtime exists but reservation already settled
            if not mission.status.terminal:
                self._runtime(mission_id).agents_ready.set()
            return
        ready = all(
            self.store.agents[u].status is AgentStatus.READY for u in mission.agent_uuids
        )
        if ready and mission.agent_uuids:
            self._runtime(mission_id).agents_ready.set()

    def handle_assignment_status(self, body: dict) -> None:
        """Public entry used by tests; normally fed from the broker."""
        self._handle_assignment_status(body)

    def _handle_assignment_status(self, body: dict) -> None:
        assignment_id = body.get("assignment_id")
        assignment = self.store.assignments.get(assignment_id)
        if assignment is None:
            log.warning("status for unknown assignment %s ignored", assignment_id)
            return
        mission = self.store.get_mission(assignment.mission_id)
        if mission.status.terminal:
            return
        try:
            status = AssignmentStatus(body["status"])
        except (KeyError, ValueError):
            log.warning("malformed assignment status %r ignored", body)
            return
        if assignment.status.terminal:
            return
        self.store.set_assignment_status(assignment_id, status)
        if status is AssignmentStatus.EXECUTING:
            return
        if status is AssignmentStatus.FAILED:
            reason = body.get("reason", "agent reported failure")
            self._fail_mission(mission.mission_id, f"assignment failed: {reason}", cancel_rest=True)
            return
        self._check_mission_completion(mission.mission_id)

    def _check_mission_completion(self, mission_id: str) -> None:
        mission = self.store.get_mission(mission_id)
        if mission.status.terminal or not mission.assignments:
            return
        if mission.status is not MissionStatus.EXECUTING:
            # reports raced ahead of the dispatch loop; the worker re-checks
            # right after it transitions to executing
            return
        assignments = self.store.mission_assignments(mission_id)
        if not all(a.status.terminal for a in assignments):
            return
        runtime = self._runtime(mission_id)
        if runtime.cancel.is_set():
            self._finalize_cancel(mission_id)
        elif all(a.status is AssignmentStatus.SUCCEEDED for a in assignments):
            try:
                self.store.set_mission_status(mission_id, MissionStatus.SUCCEEDED)
            except AlreadyTerminal:
                return
            self._release_all(mission)
        elif any(a.status is AssignmentStatus.FAILED for a in assignments):
            self._fail_mission(mission_id, "assignment failed", cancel_rest=True)
        else:
            self._fail_mission(mission_id, "assignment canceled by agent")

    # ------------------------------------------------------------------
    # failure / cancel / release

    def _fail_mission(self, mission_id: str, reason: str, cancel_rest: bool = False) -> None:
        try:
            mission = self.store.get_mission(mission_id)
            if mission.status.terminal:
                return
            self.store.set_mission_status(mission_id, MissionStatus.FAILED, failure_reason=reason)
        except (AlreadyTerminal, UnknownMission):
            return
        if cancel_rest:
            self._publish_cancel_actions(mission)
            # close the books: the agents' own canceled reports will arrive
            # after the mission is terminal and are ignored
            for assignment in self.store.mission_assignments(mission_id):
                if not assignment.status.terminal:
                    self.store.set_assignment_status(
                        assignment.assignment_id, AssignmentStatus.CANCELED
                    )
        self._release_all(mission)

    def _finalize_cancel(self, mission_id: str) -> None:
        try:
            mission = self.store.get_mission(mission_id)
            if mission.status.terminal:
                return
            self.store.set_mission_status(mission_id, MissionStatus.CANCELED)
        except (AlreadyTerminal, UnknownMission):
            return
        for assignment in self.store.mission_assignments(mission_id):
            if not assignment.status.terminal:
                self.store.set_assignment_status(assignment.assignment_id, AssignmentStatus.CANCELED)
        self._release_all(mission)

    def _cancel_grace_watch(self, mission_id: str) -> None:
        deadline = self.clock.monotonic_ms() + self.config.cancel_grace_ms
        while self.clock.monotonic_ms() < deadline:
            if self._shutdown.is_set():
                return
            mission = self.store.get_mission(mission_id)
            if mission.status.terminal:
                return
            assignments = self.store.mission_assignments(mission_id)
            if assignments and all(a.status.terminal for a in assignments):
                break
            self.clock.sleep_ms(50)
        self._finalize_cancel(mission_id)

    def _publish_cancel_actions(self, mission: MissionRecord) -> None:
        for agent_uuid in mission.agent_uuids:
            record = self.store.agents.get(agent_uuid)
            if record is None:
                continue
            action = "cancel" if record.status is AgentStatus.BUSY else "release"
            self._publish_action(agent_uuid, action, mission.mission_id)

    def _release_all(self, mission: MissionRecord) -> None:
        for agent_uuid in mission.agent_uuids:
            record = self.store.agents.get(agent_uuid)
            if record is None or record.reserved_by != mission.mission_id:
                continue
            self.store.release_agent(agent_uuid)
            # always published: an agent that is still finishing its last
            # operation holds the release and applies it afterwards
            self._publish_action(agent_uuid, "release", mission.mission_id)

    def _publish_action(self, agent_uuid: str, action: str, mission_id: str) -> None:
        self.broker.publish(
            Envelope(
                routing_key=keys.instant_action(agent_uuid),
                msg_type="instant_action",
                body={"action": action, "mission_id": mission_id},
            )
        )

    # ------------------------------------------------------------------
    # recovery

    def _resume_recovered_missions(self) -> None:
        """Journal replay leaves missions exactly where the crash left them:
        anything short of dispatch is failed (service jobs are not resumable);
        dispatched/executing missions re-publish any assignment the agent may
        not have seen (deterministic ids make this idempotent) and resume
        tracking."""
        for mission in list(self.store.missions.values()):
            if mission.status.terminal:
                continue
            if mission.status in (
                MissionStatus.CREATED,
                MissionStatus.RESERVING,
                MissionStatus.PLANNING,
            ):
                self._fail_mission(mission.mission_id, "recovered")
            elif mission.status in (MissionStatus.DISPATCHING, MissionStatus.EXECUTING):
                self._runtime(mission.mission_id)
                self._redispatch(mission)

    def _redispatch(self, mission: MissionRecord) -> None:
        pending = [
            a
            for a in self.store.mission_assignments(mission.mission_id)
            if a.status in (AssignmentStatus.TO_DISPATCH, AssignmentStatus.DISPATCHED)
        ]
        now = self.clock.now_ms()
        for assignment in pending:
            self.store.set_assignment_status(
                assignment.assignment_id, AssignmentStatus.DISPATCHED, dispatched_at=now
            )
        if mission.status is MissionStatus.DISPATCHING:
            self.store.set_mission_status(mission.mission_id, MissionStatus.EXECUTING)
        for assignment in pending:
            self.broker.publish(
                Envelope(
                    routing_key=keys.assignment(assignment.agent_uuid),
                    msg_type="assignment",
                    body={
                        "assignment_id": assignment.assignment_id,
                        "mission_id": mission.mission_id,
                        "payload": assignment.payload,
                    },
                )
            )
        self._check_mission_completion(mission.mission_id)
