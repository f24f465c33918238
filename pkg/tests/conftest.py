import queue
import threading
import time

import pytest

from yardtower.broker import Broker, Envelope, keys
from yardtower.model import Geometry

AGENT_TOKEN = "agent-secret"


def wait_until(predicate, timeout=10.0, interval=0.02, message="condition"):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return
        time.sleep(interval)
    raise AssertionError(f"timed out waiting for {message}")


class FakeAgent:
    """Scripted agent for orchestrator tests: checks in over the broker,
    answers reserve with ready, and runs assignments by immediately
    reporting executing then a scripted outcome."""

    def __init__(self, broker: Broker, agent_uuid: str, outcome: str = "succeeded", work_s: float = 0.0):
        self.broker = broker
        self.agent_uuid = agent_uuid
        self.outcome = outcome
        self.work_s = work_s
        self.status = "free"
        self.received_assignments: list[dict] = []
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self._current: str | None = None
        self._pending_release = False

    def start(self):
        self.broker.publish(
            Envelope(
                routing_key=keys.checkin(self.agent_uuid),
                msg_type="checkin",
                body={
                    "agent_uuid": self.agent_uuid,
                    "name": self.agent_uuid,
                    "agent_class": "vehicle",
                    "geometry": Geometry(4.0, 2.0).to_doc(),
                    "token": AGENT_TOKEN,
                },
            )
        )
        for pattern, handler in (
            (keys.instant_action(self.agent_uuid), self._on_action),
            (keys.assignment(self.agent_uuid), self._on_assignment),
        ):
            sub = self.broker.subscribe(pattern)
            t = threading.Thread(target=self._pump, args=(sub, handler), daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self):
        self._stop.set()

    def _pump(self, sub, handler):
        while not self._stop.is_set():
            try:
                env = sub.get(timeout=0.1)
            except queue.Empty:
                continue
            except Exception:
                return
            handler(env.body)

    def _publish_state(self, body):
        self.broker.publish(
            Envelope(routing_key=keys.state(self.agent_uuid), msg_type="agent_state", body=body)
        )

    def _on_action(self, body):
        action = body.get("action")
        if action == "reserve" and self.status == "free":
            self.status = "ready"
            self._publish_state({"status": "ready"})
        elif action == "release":
            if self.status == "busy":
                self._pending_release = True
            else:
                self.status = "free"
                self._publish_state({"status": "free"})
        elif action == "cancel" and self._current:
            current, self._current = self._current, None
            self.status = "ready"
            self._publish_state({"assignment_id": current, "status": "canceled"})
            self._publish_state({"status": "ready"})

    def _on_assignment(self, body):
        self.received_assignments.append(body)
        assignment_id = body["assignment_id"]
        self._current = assignment_id
        self.status = "busy"
        self._publish_state({"status": "busy"})
        self._publish_state({"assignment_id": assignment_id, "status": "executing"})
        if self.work_s:
            def finish():
                time.sleep(self.work_s)
                self._finish(assignment_id)
            t = threading.Thread(target=finish, daemon=True)
            t.start()
            self._threads.append(t)
        else:
            self._finish(assignment_id)

    def _finish(self, assignment_id):
        if self._current != assignment_id:
            return  # canceled meanwhile
        self._current = None
        self._publish_state({"assignment_id": assignment_id, "status": self.outcome})
        if self._pending_release:
            self._pending_release = False
            self.status = "free"
            self._publish_state({"status": "free"})
        else:
            self.status = "ready"
            self._publish_state({"status": "ready"})


@pytest.fixture
def broker():
    b = Broker()
    yield b
    b.close()


class TowerHarness:
    """In-process tower (store + registry + orchestrator) plus kit-backed
    HTTP services on ephemeral ports."""

    def __init__(self, broker, data_dir=None, reserve_timeout_ms=5000, cancel_grace_ms=2000):
        from yardtower.orchestrator import Orchestrator, OrchestratorConfig
        from yardtower.registry import ServiceRegistry
        from yardtower.store import StateStore

        self.broker = broker
        self.store = StateStore(data_dir, broker, agent_token=AGENT_TOKEN)
        self.registry = ServiceRegistry(self.store)
        self.orchestrator = Orchestrator(
            self.store,
            self.registry,
            broker,
            config=OrchestratorConfig(
                reserve_timeout_ms=reserve_timeout_ms, cancel_grace_ms=cancel_grace_ms
            ),
        )
        self.servers = []
        self.tables = {}

    def add_service(self, name, domain, handler, mode="fast", delay_ms=0.0, never_ready=False,
                    poll_interval_ms=50, result_timeout_ms=5000):
        from yardtower.model import ServiceRegistration
        from yardtower.services import JobTable, ServiceServer

        table = JobTable(handler, mode=mode, delay_ms=delay_ms, never_ready=never_ready)
        reg = self.registry.register_service(
            name, domain, "http://127.0.0.1:1",
            poll_interval_ms=poll_interval_ms, result_timeout_ms=result_timeout_ms,
        )
        server = ServiceServer(table, api_key=reg.api_key).start()
        self.servers.append(server)
        self.tables[name] = table
        self.store.services[name] = ServiceRegistration.from_doc(
            {**reg.to_doc(), "base_url": server.base_url}
        )
        return table

    def start(self):
        self.orchestrator.start()
        return self

    def stop(self):
        self.orchestrator.stop()
        for s in self.servers:
            s.stop()
        self.store.close()

    def journal_rows(self):
        from yardtower.journal import read_journal

        return [
            (e.event.kind, e.event.subject_id, e.event.body)
            for e in read_journal(self.store._journal.path)
        ]
