"""Declarative scenario runner.

One JSON file describes a whole desk-scale deployment: yard map, reference
services, recipes, simulated agents and a mission script. The runner boots
the tower with its gateway, registers and launches the services (in-process
threads by default, subprocesses with ``spawn``), checks the agents in over
the broker WebSocket bridge, drives the script through the gateway HTTP API
exactly like a user app would, and writes a report with one entry per
mission (final status, duration, journal event trace) plus any invariant
violations detected over the run.

Exit codes: 0 all expectations met and no violations, 1 scenario assertion
failure, 2 unparseable scenario, 3 port conflict.
"""
from __future__ import annotations

import json
import socket
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .agent import AgentConfig, AgentRuntime
from .errors import YardError
from .journal import read_journal
from .model import Geometry, MapObject, MissionRecipe, Pose, ServiceDomain
from .registry import ValidationFailed
from .services import build_service
from .tower import PortInUse, Tower, TowerConfig, TowerServer

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_PARSE = 2
EXIT_PORT = 3


class ScenarioError(YardError):
    pass


def allocate_port(host: str = "127.0.0.1") -> int:
    probe = socket.socket()
    probe.bind((host, 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


@dataclass
class ScenarioResult:
    exit_code: int
    report: dict = field(default_factory=dict)


def load_scenario(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    for step in doc.get("script", []):
        if step.get("action") not in ("create_mission", "wait_terminal", "assert_status", "sleep"):
            raise ScenarioError(f"unknown script action {step.get('action')!r}")
    return doc


class ScenarioRunner:
    def __init__(
        self,
        scenario: dict,
        *,
        data_dir: str | Path | None = None,
        spawn: bool = False,
        seed: int | None = None,
        report_path: str | Path | None = None,
    ):
        self.scenario = scenario
        self.spawn = spawn
        self.seed = seed if seed is not None else scenario.get("seed", 0)
        self.report_path = Path(report_path) if report_path else None
        self.clock_scale = float(scenario.get("clock_scale", 1.0))
        tower_cfg = scenario.get("tower", {})
        self.data_dir = Path(data_dir) if data_dir else Path(tempfile.mkdtemp(prefix="yard-"))
        self.config = TowerConfig(
            port=int(tower_cfg.get("port", 0)),
            data_dir=self.data_dir,
            reserve_timeout_ms=int(tower_cfg.get("reserve_timeout_ms", 30_000)),
            cancel_grace_ms=int(tower_cfg.get("cancel_grace_ms", 10_000)),
        )
        self.tower: Tower | None = None
        self.server: TowerServer | None = None
        self.agents: list[AgentRuntime] = []
        self.service_servers = []
        self.service_procs: list[subprocess.Popen] = []
        self.missions: dict[str, dict] = {}  # alias -> {mission_id, expect, created}
        self.violations: list[str] = []
        self._http: httpx.Client | None = None

    # -- boot ----------------------------------------------------------------

    def boot(self) -> None:
        self.tower = Tower(self.config).start()
        self.server = TowerServer(self.tower).start()
        self._http = httpx.Client(
            base_url=self.server.base_url,
            headers={"Authorization": f"Bearer {self.config.operator_token}"},
            timeout=30.0,
        )
        self._apply_yard()
        self._start_services()
        self._apply_recipes()
        self._start_agents()

    def _apply_yard(self) -> None:
        objects = [MapObject.from_doc(d) for d in self.scenario.get("yard", {}).get("map_objects", [])]
        if objects:
            self.tower.store.commit_map_delta(objects, [])

    def _start_services(self) -> None:
        for svc in self.scenario.get("services", []):
            name = svc["name"]
            domain = ServiceDomain(svc.get("domain", "assignment_planner"))
            host = svc.get("host", "127.0.0.1")
            port = int(svc.get("port", 0)) or allocate_port(host)
            registration = self.tower.registry.register_service(
                name,
                domain,
                f"http://{host}:{port}",
                result_timeout_ms=int(svc.get("result_timeout_ms", 90_000)),
                poll_interval_ms=int(svc.get("poll_interval_ms", 1_000)),
            )
            config = {
                **svc,
                "host": host,
                "port": port,
                "api_key": registration.api_key,
                "time_scale": float(svc.get("time_scale", self.clock_scale)),
                "export_dir": svc.get("export_dir", str(self.data_dir / "exports")),
            }
            if self.spawn:
                cfg_path = self.data_dir / f"service-{name}.json"
                cfg_path.write_text(json.dumps(config))
                proc = subprocess.Popen(
                    [sys.executable, "-m", "yardtower.cli", "service", "run", "--config", str(cfg_path)],
                    stdout=subprocess.DEVNULL,
                    stderr=subprocess.DEVNULL,
                )
                self.service_procs.append(proc)
            else:
                self.service_servers.append(build_service(config).start())
        if self.spawn:
            self._await_services()

    def _await_services(self, timeout_s: float = 15.0) -> None:
        deadline = time.monotonic() + timeout_s
        for reg in self.tower.registry.list_services():
            while True:
                try:
                    httpx.get(f"{reg.base_url}/api/jobs/probe", timeout=1.0)
                    break
                except httpx.HTTPError:
                    if time.monotonic() > deadline:
                        raise ScenarioError(f"service {reg.service_name} did not come up")
                    time.sleep(0.1)

    def _apply_recipes(self) -> None:
        for doc in self.scenario.get("recipes", []):
            try:
                self.tower.registry.upsert_recipe(MissionRecipe.from_doc(doc))
            except ValidationFailed as exc:
                raise ScenarioError(f"recipe {doc.get('name')!r} invalid: {exc}") from None

    def _start_agents(self) -> None:
        for spec in self.scenario.get("agents", []):
            config = AgentConfig(
                agent_uuid=spec["uuid"],
                name=spec.get("name", spec["uuid"]),
                geometry=Geometry.from_doc(spec.get("geometry", {"length_m": 4.0, "width_m": 2.0})),
                token=self.config.agent_token,
                broker_url=self.server.broker_ws_url,
                sensor_rate_hz=float(spec.get("sensor_rate_hz", 10.0)),
                clock_scale=float(spec.get("clock_scale", self.clock_scale)),
                start_pose=Pose.from_doc(spec["start_pose"]) if spec.get("start_pose") else None,
            )
            self.agents.append(AgentRuntime.create(config).start())
        deadline = time.monotonic() + 15
        wanted = {spec["uuid"] for spec in self.scenario.get("agents", [])}
        while wanted - set(self.tower.store.agents):
            if time.monotonic() > deadline:
                raise ScenarioError(f"agents never checked in: {wanted - set(self.tower.store.agents)}")
            time.sleep(0.05)

    # -- script ----------------------------------------------------------------

    def run_script(self) -> bool:
        ok = True
        for step in self.scenario.get("script", []):
            action = step["action"]
            if action == "create_mission":
                ok = self._create_mission(step) and ok
            elif action == "wait_terminal":
                ok = self._wait_terminal(step) and ok
            elif action == "assert_status":
                ok = self._assert_status(step) and ok
            elif action == "sleep":
                time.sleep(float(step.get("seconds", 1.0)))
        return ok

    def _create_mission(self, step: dict) -> bool:
        alias = step.get("id") or f"mission-{len(self.missions) + 1}"
        resp = self._http.post(
            "/api/missions",
            json={
                "recipe_name": step["recipe"],
                "request": step.get("request", {}),
                "agent_uuids": step.get("agents", []),
            },
        )
        expect_create = step.get("expect_create", 201)
        if resp.status_code != expect_create:
            self.violations.append(
                f"{alias}: create returned {resp.status_code} (wanted {expect_create}): {resp.text}"
            )
            return False
        if resp.status_code == 201:
            self.missions[alias] = {
                "mission_id": resp.json()["mission_id"],
                "expect": step.get("expect", "succeeded"),
                "recipe": step["recipe"],
            }
        return True

    def _mission_doc(self, alias: str) -> dict:
        mission_id = self.missions[alias]["mission_id"]
        return self._http.get(f"/api/missions/{mission_id}").json()

    def _wait_terminal(self, step: dict) -> bool:
        aliases = [step["mission"]] if step.get("mission") else list(self.missions)
        timeout_s = float(step.get("timeout_s", 60.0))
        deadline = time.monotonic() + timeout_s
        for alias in aliases:
            while True:
                doc = self._mission_doc(alias)
                if doc["status"] in ("succeeded", "failed", "canceled"):
                    break
                if time.monotonic() > deadline:
                    self.violations.append(f"{alias}: not terminal within {timeout_s}s")
                    return False
                time.sleep(0.05)
        return True

    def _assert_status(self, step: dict) -> bool:
        doc = self._mission_doc(step["mission"])
        if doc["status"] != step["status"]:
            self.violations.append(
                f"{step['mission']}: expected {step['status']}, got {doc['status']}"
                f" ({doc.get('failure_reason')})"
            )
            return False
        return True

    # -- report ------------------------------------------------------------------

    def _check_invariants(self) -> None:
        entries = read_journal(self.data_dir / "events.jsonl")
        seqs = [e.seq for e in entries]
        if seqs and seqs != list(range(seqs[0], seqs[0] + len(seqs))):
            self.violations.append("journal has sequence gaps")
        # the same work must never be re-issued under a fresh assignment id
        seen: dict[tuple[str, str, str], set[str]] = {}
        for assignment in self.tower.store.assignments.values():
            key = (
                assignment.mission_id,
                assignment.agent_uuid,
                json.dumps(assignment.payload, sort_keys=True),
            )
            seen.setdefault(key, set()).add(assignment.assignment_id)
        for (mission_id, agent_uuid, _), ids in seen.items():
            if len(ids) > 1:
                self.violations.append(
                    f"duplicate assignments for mission {mission_id} agent {agent_uuid}: {sorted(ids)}"
                )

    def _event_trace(self, mission_id: str) -> list[str]:
        assignment_ids = set(self.tower.store.get_mission(mission_id).assignments)
        trace = []
        for entry in read_journal(self.data_dir / "events.jsonl"):
            body = entry.event.body
            subject = entry.event.subject_id
            if (
                subject == mission_id
                or subject in assignment_ids
                or body.get("mission_id") == mission_id
                or body.get("reserved_by") == mission_id
            ):
                trace.append(entry.event.kind.value)
        return trace

    def build_report(self, expectations_ok: bool) -> dict:
        missions = []
        for alias, info in self.missions.items():
            doc = self._mission_doc(alias)
            missions.append(
                {
                    "id": doc["mission_id"],
                    "alias": alias,
                    "recipe": info["recipe"],
                    "final_status": doc["status"],
                    "expected_status": info["expect"],
                    "failure_reason": doc.get("failure_reason"),
                    "duration_ms": doc["updated_at"] - doc["created_at"],
                    "event_trace": self._event_trace(doc["mission_id"]),
                }
            )
            if doc["status"] != info["expect"]:
                expectations_ok = False
        report = {
            "seed": self.seed,
            "clock_scale": self.clock_scale,
            "missions": missions,
            "violations": self.violations,
            "ok": expectations_ok and not self.violations,
        }
        if self.report_path:
            self.report_path.parent.mkdir(parents=True, exist_ok=True)
            self.report_path.write_text(json.dumps(report, indent=2))
        return report

    def shutdown(self) -> None:
        for runtime in self.agents:
            runtime.stop()
        for proc in self.service_procs:
            proc.terminate()
        for proc in self.service_procs:
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
        for server in self.service_servers:
            server.stop()
        if self._http is not None:
            self._http.close()
        if self.server is not None:
            self.server.stop()
        if self.tower is not None:
            self.tower.stop()

    def run(self, hold: bool = False) -> ScenarioResult:
        try:
            self.boot()
        except PortInUse:
            self.shutdown()
            return ScenarioResult(EXIT_PORT, {"error": "port conflict"})
        try:
            ok = self.run_script()
            self._check_invariants()
            report = self.build_report(ok)
            if hold:
                print(f"scenario held open at {self.server.base_url}; Ctrl-C to stop")
                try:
                    while True:
                        time.sleep(1)
                except KeyboardInterrupt:
                    pass
            return ScenarioResult(EXIT_OK if report["ok"] else EXIT_ASSERTION, report)
        finally:
            self.shutdown()


def run_scenario(
    path: str | Path,
    *,
    data_dir: str | Path | None = None,
    spawn: bool = False,
    seed: int | None = None,
    report_path: str | Path | None = None,
    hold: bool = False,
) -> ScenarioResult:
    try:
        scenario = load_scenario(path)
    except (OSError, json.JSONDecodeError, ScenarioError) as exc:
        return ScenarioResult(EXIT_PARSE, {"error": f"scenario parse error: {exc}"})
    runner = ScenarioRunner(
        scenario, data_dir=data_dir, spawn=spawn, seed=seed, report_path=report_path
    )
    return runner.run(hold=hold)
