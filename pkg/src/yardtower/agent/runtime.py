"""Agent runtime: the vehicle-side control loop.

Connects to the broker (in-process or over the wire bridge), checks in, and
serves the command loop: a reserve action flips the agent to ready, an
assignment is split into operation-module executions (steps run in order,
operations within one step run concurrently), an instant cancel aborts the
running step, release returns the agent to free. The runtime accepts one
assignment at a time: a different assignment arriving while busy is refused
with reason ``agent_busy``; a re-delivery of the current one (tower
recovery) is ignored. Telemetry never blocks execution, and on every
(re)connect the runtime re-announces its check-in and current status so a
tower restart can pick up mid-mission tracking.
"""
from __future__ import annotations

import logging
import queue
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor
from concurrent.futures import wait as futures_wait
from dataclasses import dataclass, field

from ..broker import Envelope, keys
from ..broker.client import InProcessLink, WsLink
from ..clock import Clock
from ..errors import YardError
from ..model import AgentStatus, AssignmentPayload, Geometry, Pose
from .modules import BUILTIN_MODULES, ModuleContext, OperationCanceled, OperationFailed

log = logging.getLogger(__name__)


class UnknownModule(YardError):
    def __init__(self, module: str):
        self.module = module
        super().__init__(f"unknown_module:{module}")


class EmptySteps(YardError):
    pass


def split_assignment(payload: dict, modules: dict) -> list[list[tuple[str, dict]]]:
    """Execution plan mirroring the payload: ordered steps of (module,
    params) pairs to run concurrently. Admission is all-or-nothing: any
    unknown module or empty step rejects the whole assignment before
    anything runs."""
    parsed = AssignmentPayload.from_doc(payload)
    if not parsed.steps:
        raise EmptySteps("assignment has no steps")
    plan: list[list[tuple[str, dict]]] = []
    for step in parsed.steps:
        if not step:
            raise EmptySteps("assignment step has no operations")
        for op in step:
            if op.module not in modules:
                raise UnknownModule(op.module)
        plan.append([(op.module, op.params) for op in step])
    return plan


@dataclass
class AgentConfig:
    agent_uuid: str
    name: str
    geometry: Geometry
    token: str
    broker_url: str | None = None  # ws://host:port/ws/broker; None = in-process
    agent_class: str = "vehicle"
    sensor_rate_hz: float = 10.0
    clock_scale: float = 1.0
    start_pose: Pose | None = None

    def __post_init__(self):
        if self.sensor_rate_hz <= 0:
            raise ValueError("sensor_rate_hz must be > 0")
        if self.clock_scale <= 0:
            raise ValueError("clock_scale must be > 0")


@dataclass
class _Execution:
    assignment_id: str
    cancel: threading.Event = field(default_factory=threading.Event)
    thread: threading.Thread | None = None


class AgentRuntime:
    def __init__(self, config: AgentConfig, link, modules: dict | None = None):
        self.config = config
        self.link = link
        self.modules = dict(BUILTIN_MODULES if modules is None else modules)
        self.clock = Clock(scale=config.clock_scale)
        self.status = AgentStatus.FREE
        self.pose = config.start_pose
        self._status_lock = threading.Lock()
        self._last_sensor_ts = 0
        self._execution: _Execution | None = None
        self._last_assignment: tuple[str, str, str | None] | None = None
        self._pending_release = False
        self._inbox: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        link.on_connect = self._announce

    # -- wiring ---------------------------------------------------------

    @classmethod
    def create(cls, config: AgentConfig, broker=None, modules: dict | None = None) -> "AgentRuntime":
        if config.broker_url:
            link = WsLink(config.broker_url, config.agent_uuid, config.token)
        else:
            if broker is None:
                raise ValueError("in-process agent needs a broker instance")
            link = InProcessLink(broker)
        return cls(config, link, modules)

    def start(self) -> "AgentRuntime":
        self.link.connect()
        for pattern in (
            keys.assignment(self.config.agent_uuid),
            keys.instant_action(self.config.agent_uuid),
        ):
            sub = self.link.subscribe(pattern)
            pump = threading.Thread(target=self._pump, args=(sub,), daemon=True)
            pump.start()
            self._threads.append(pump)
        loop = threading.Thread(target=self._control_loop, daemon=True)
        loop.start()
        self._threads.append(loop)
        if self.pose is not None:
            self._publish_sensors(self.pose)
        return self

    def stop(self) -> None:
        self._stop.set()
        execution = self._execution
        if execution is not None:
            execution.cancel.set()
        self.link.close()
        for t in self._threads:
            if t is not threading.current_thread():
                t.join(timeout=5)

    def _pump(self, sub) -> None:
        while not self._stop.is_set():
            try:
                self._inbox.put(sub.get(timeout=0.25))
            except queue.Empty:
                continue
            except YardError:
                return

    # -- publications -----------------------------------------------------

    def _announce(self) -> None:
        """(Re)connect greeting: check in and re-publish current status."""
        self.link.publish(
            Envelope(
                routing_key=keys.checkin(self.config.agent_uuid),
                msg_type="checkin",
                body={
                    "agent_uuid": self.config.agent_uuid,
                    "name": self.config.name,
                    "agent_class": self.config.agent_class,
                    "geometry": self.config.geometry.to_doc(),
                    "token": self.config.token,
                },
            )
        )
        self._publish_status()
        if self._last_assignment is not None and self._execution is None:
            # a tower that crashed before journaling our final report needs it
            assignment_id, status, reason = self._last_assignment
            self._publish_assignment_status(assignment_id, status, reason)

    def _publish_status(self) -> None:
        self.link.publish(
            Envelope(
                routing_key=keys.state(self.config.agent_uuid),
                msg_type="agent_state",
                body={"status": self.status.value},
            )
        )

    def _set_status(self, status: AgentStatus) -> None:
        with self._status_lock:
            self.status = status
        self._publish_status()

    def _publish_assignment_status(self, assignment_id: str, status: str, reason: str | None = None) -> None:
        body = {"assignment_id": assignment_id, "status": status}
        if reason:
            body["reason"] = reason
        self.link.publish(
            Envelope(
                routing_key=keys.state(self.config.agent_uuid),
                msg_type="agent_state",
                body=body,
            )
        )

    def _publish_sensors(self, pose: Pose | None, diagnostics: dict | None = None) -> None:
        if pose is not None:
            self.pose = pose
        if self.pose is None:
            return
        ts = max(self.clock.now_ms(), self._last_sensor_ts + 1)
        self._last_sensor_ts = ts
        body = {"ts": ts, "pose": self.pose.to_doc(), "diagnostics": diagnostics or {}}
        self.link.publish(
            Envelope(
                routing_key=keys.sensors(self.config.agent_uuid),
                msg_type="sensors",
                body=body,
            )
        )

    # -- control loop ------------------------------------------------------

    def _control_loop(self) -> None:
        while not self._stop.is_set():
            try:
                envelope = self._inbox.get(timeout=0.25)
            except queue.Empty:
                continue
            try:
                if envelope.msg_type == "instant_action":
                    self._on_action(envelope.body)
                elif envelope.msg_type == "assignment":
                    self._on_assignment(envelope.body)
            except Exception:
                log.exception("agent %s failed handling %s", self.config.agent_uuid, envelope.msg_type)

    def _on_action(self, body: dict) -> None:
        action = body.get("action")
        if action == "reserve":
            if self.status is AgentStatus.FREE:
                self._set_status(AgentStatus.READY)
            else:
                log.warning("agent %s got reserve while %s", self.config.agent_uuid, self.status.value)
        elif action == "release":
            if self.status is AgentStatus.BUSY:
                self._pending_release = True  # applied once the assignment ends
            else:
                self._set_status(AgentStatus.FREE)
        elif action == "cancel":
            execution = self._execution
            if execution is not None:
                execution.cancel.set()

    def _on_assignment(self, body: dict) -> None:
        assignment_id = body.get("assignment_id", "")
        execution = self._execution
        if execution is not None and execution.assignment_id == assignment_id:
            return  # re-delivery of the assignment we are already running
        if self._last_assignment is not None and self._last_assignment[0] == assignment_id:
            # tower lost our final report in a crash; repeat it
            _, status, reason = self._last_assignment
            self._publish_assignment_status(assignment_id, status, reason)
            return
        if self.status is AgentStatus.BUSY:
            self._publish_assignment_status(assignment_id, "failed", reason="agent_busy")
            return
        if self.status is not AgentStatus.READY:
            # assignments are only valid after the reserve/ready handshake
            self._publish_assignment_status(assignment_id, "failed", reason="agent_not_ready")
            return
        try:
            plan = split_assignment(body.get("payload", {}), self.modules)
        except (UnknownModule, EmptySteps) as exc:
            self._publish_assignment_status(assignment_id, "failed", reason=str(exc))
            return
        execution = _Execution(assignment_id)
        self._execution = execution
        self._set_status(AgentStatus.BUSY)
        self._publish_assignment_status(assignment_id, "executing")
        execution.thread = threading.Thread(
            target=self._execute, args=(execution, plan), daemon=True
        )
        execution.thread.start()

    def _execute(self, execution: _Execution, plan: list[list[tuple[str, dict]]]) -> None:
        outcome, reason = "succeeded", None
        try:
            for step in plan:
                self._run_step(step, execution.cancel)
        except OperationCanceled:
            outcome, reason = "canceled", "canceled by tower"
        except OperationFailed as exc:
            outcome, reason = "failed", str(exc)
        except Exception as exc:  # defensive: a module bug fails the assignment
            log.exception("operation crashed")
            outcome, reason = "failed", f"internal: {exc}"
        finally:
            self._execution = None
        self._last_assignment = (execution.assignment_id, outcome, reason)
        self._publish_assignment_status(execution.assignment_id, outcome, reason)
        if not self._stop.is_set():
            if self._pending_release:
                self._pending_release = False
                self._set_status(AgentStatus.FREE)
            else:
                self._set_status(AgentStatus.READY)

    def _run_step(self, step: list[tuple[str, dict]], cancel: threading.Event) -> None:
        """Run one step's operations concurrently; the step completes when
        all of them do. Failure of any cancels its siblings."""
        ctx = ModuleContext(
            clock=self.clock,
            cancel=cancel,
            telemetry=self._publish_sensors,
            sensor_rate_hz=self.config.sensor_rate_hz,
        )
        if len(step) == 1:
            module, params = step[0]
            self.modules[module](params, ctx)
            return
        with ThreadPoolExecutor(max_workers=len(step)) as pool:
            futures = [pool.submit(self.modules[m], params, ctx) for m, params in step]
            done, _pending = futures_wait(futures, return_when=FIRST_EXCEPTION)
            if any(f.exception() is not None for f in done):
                cancel.set()  # stop the siblings of a failed operation
            futures_wait(futures)
            errors = [f.exception() for f in futures if f.exception() is not None]
            if errors:
                not_canceled = [e for e in errors if not isinstance(e, OperationCanceled)]
                raise (not_canceled[0] if not_canceled else errors[0])


def run_agent(config: AgentConfig, modules: dict | None = None, broker=None) -> AgentRuntime:
    """Start an agent and return its runtime (long-running; daemon threads)."""
    runtime = AgentRuntime.create(config, broker=broker, modules=modules)
    return runtime.start()
