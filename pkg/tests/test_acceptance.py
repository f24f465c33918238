"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines; any
assertion failure is the corresponding FAIL.
"""
import json
import math
import socket
import threading
import time
from pathlib import Path

import pytest

from conftest import AGENT_TOKEN, FakeAgent, TowerHarness, wait_until
from yardtower.agent import AgentConfig, AgentRuntime
from yardtower.agent.modules import BUILTIN_MODULES
from yardtower.broker import Broker, Envelope, topic_matches
from yardtower.journal import read_journal
from yardtower.model import (
    ApplyResult,
    EventKind,
    Geometry,
    MissionRecipe,
    MissionStatus,
    Pose,
    RecipeStep,
    ServiceDomain,
)
from yardtower.orchestrator import PermissionViolation, enforce_response_effects
from yardtower.scenario import ScenarioRunner, load_scenario
from yardtower.services import TrajectoryCoordinator
from yardtower.tower import Tower, TowerConfig, TowerServer

SCENARIOS = Path("scenarios")


def ok(n, text):
    print(f"\n[PASS] criterion {n}: {text}")


# ---------------------------------------------------------------------------
# 1. end-to-end "unload goods"


def test_criterion_1_unload_goods_end_to_end(tmp_path):
    started = time.monotonic()
    runner = ScenarioRunner(
        load_scenario(SCENARIOS / "unload_goods.json"), data_dir=tmp_path / "data"
    )
    result = runner.run()
    wall_s = time.monotonic() - started
    assert result.exit_code == 0, result.report
    [mission] = result.report["missions"]
    assert mission["final_status"] == "succeeded", mission
    assert wall_s < 10.0, f"took {wall_s:.1f}s"

    # journal order: reserve -> map_write -> path dispatch -> coop dispatch
    # -> assignment dispatch -> assignment succeeded
    entries = read_journal(tmp_path / "data" / "events.jsonl")
    mission_id = mission["id"]
    created = next(
        e.seq for e in entries if e.event.kind is EventKind.MISSION_CREATED
        and e.event.subject_id == mission_id
    )
    entries = [e for e in entries if e.seq > created]  # skip scenario bootstrap

    def seq_of(predicate, label):
        for entry in entries:
            if predicate(entry.event):
                return entry.seq
        raise AssertionError(f"event not found: {label}")

    reserve = seq_of(
        lambda e: e.kind is EventKind.AGENT_STATUS_CHANGED
        and e.body.get("reserved_by") == mission_id,
        "reserve",
    )
    map_write = seq_of(lambda e: e.kind is EventKind.MAP_UPDATED, "map_write")
    path_dispatch = seq_of(
        lambda e: e.kind is EventKind.STEP_DISPATCHED and e.body["step_id"] == "path_planner",
        "path dispatch",
    )
    coop_dispatch = seq_of(
        lambda e: e.kind is EventKind.STEP_DISPATCHED and e.body["step_id"] == "coop",
        "coop dispatch",
    )
    assignment_dispatch = seq_of(
        lambda e: e.kind is EventKind.ASSIGNMENT_STATUS_CHANGED
        and e.body["status"] == "dispatched",
        "assignment dispatch",
    )
    assignment_done = seq_of(
        lambda e: e.kind is EventKind.ASSIGNMENT_STATUS_CHANGED
        and e.body["status"] == "succeeded",
        "assignment succeeded",
    )
    order = [reserve, map_write, path_dispatch, coop_dispatch, assignment_dispatch, assignment_done]
    assert order == sorted(order), f"journal order violated: {order}"
    ok(1, f"unload goods succeeded in {wall_s:.1f}s wall with the exact event order")


# ---------------------------------------------------------------------------
# 2. multi-agent deconfliction


def interpolate(stream, t):
    if t <= stream[0][0]:
        return stream[0][1], stream[0][2]
    if t >= stream[-1][0]:
        return stream[-1][1], stream[-1][2]
    for (t1, x1, y1), (t2, x2, y2) in zip(stream, stream[1:]):
        if t1 <= t <= t2:
            f = (t - t1) / (t2 - t1) if t2 > t1 else 0.0
            return x1 + f * (x2 - x1), y1 + f * (y2 - y1)
    raise AssertionError("unreachable")


def min_pairwise_distance(stream_a, stream_b, step_wall_ms):
    t0 = min(stream_a[0][0], stream_b[0][0])
    t1 = max(stream_a[-1][0], stream_b[-1][0])
    best = math.inf
    t = t0
    while t <= t1:
        xa, ya = interpolate(stream_a, t)
        xb, yb = interpolate(stream_b, t)
        best = min(best, math.hypot(xa - xb, ya - yb))
        t += step_wall_ms
    return best


def test_criterion_2_crossing_trucks_keep_separation(tmp_path):
    scenario = load_scenario(SCENARIOS / "crossing_trucks.json")
    runner = ScenarioRunner(scenario, data_dir=tmp_path / "data")
    runner.boot()
    telemetry = {"truck-a": [], "truck-b": []}
    sub = runner.tower.broker.subscribe("agent.*.sensors")
    stop = threading.Event()

    def capture():
        import queue as _q

        while not stop.is_set():
            try:
                env = sub.get(timeout=0.2)
            except _q.Empty:
                continue
            except Exception:
                return
            uuid = env.routing_key.split(".")[1]
            pose = env.body["pose"]
            telemetry[uuid].append((env.body["ts"], pose["x"], pose["y"]))

    tap = threading.Thread(target=capture, daemon=True)
    tap.start()
    try:
        assert runner.run_script(), runner.violations
        report = runner.build_report(True)
        assert report["ok"], report
        time.sleep(0.3)
    finally:
        stop.set()
        runner.shutdown()

    assert len(telemetry["truck-a"]) > 10 and len(telemetry["truck-b"]) > 10
    # 100 ms of trajectory time, converted to the wall-clock telemetry base
    step_wall_ms = 100.0 / scenario["clock_scale"]
    min_dist = min_pairwise_distance(telemetry["truck-a"], telemetry["truck-b"], step_wall_ms)
    assert min_dist >= 2.95, f"min pairwise distance {min_dist:.2f} m"
    ok(2, f"both crossing missions succeeded; oracle min distance {min_dist:.2f} m >= 2.95 m")


# ---------------------------------------------------------------------------
# 3. multi-assignment mission with concurrent drive+work


def test_criterion_3_multi_assignment_field_mission(tmp_path):
    broker = Broker()
    harness = TowerHarness(broker, tmp_path / "data")
    coordinator = TrajectoryCoordinator(time_scale=20.0)

    def planner_handler(doc):
        request = doc["request"]
        agents = doc["context"]["agents"]
        return {
            "paths": [
                {
                    "agent_uuid": a["agent_uuid"],
                    "waypoints": [
                        a["pose"],
                        request["goals"][a["agent_uuid"]],
                    ],
                }
                for a in agents
            ]
        }

    harness.add_service("path-svc", ServiceDomain.ASSIGNMENT_PLANNER, planner_handler)
    harness.add_service("coop-svc", ServiceDomain.ASSIGNMENT_PLANNER, coordinator)
    harness.registry.upsert_recipe(
        MissionRecipe(
            "field pass",
            "",
            (
                RecipeStep("path", "path-svc", 1),
                RecipeStep(
                    "coop", "coop-svc", 2, depends_on=("path",),
                    apply_result=ApplyResult.ASSIGNMENT_SOURCE,
                ),
            ),
        )
    )
    harness.start()

    op_events: dict[str, list] = {u: [] for u in ("tractor1", "tractor2", "tractor3")}
    events_lock = threading.Lock()

    def instrumented(uuid):
        def wrap(name, fn):
            def run(params, ctx):
                with events_lock:
                    op_events[uuid].append((name, "start", time.monotonic()))
                try:
                    return fn(params, ctx)
                finally:
                    with events_lock:
                        op_events[uuid].append((name, "end", time.monotonic()))

            return run

        return {name: wrap(name, fn) for name, fn in BUILTIN_MODULES.items()}

    agents = []
    for i, uuid in enumerate(op_events):
        config = AgentConfig(
            agent_uuid=uuid,
            name=uuid,
            geometry=Geometry(3.0, 1.8),
            token=AGENT_TOKEN,
            clock_scale=20.0,
            sensor_rate_hz=20.0,
            start_pose=Pose(0.0, 20.0 * i, 0.0),
        )
        agents.append(
            AgentRuntime.create(config, broker=broker, modules=instrumented(uuid)).start()
        )
    wait_until(lambda: len(harness.store.agents) == 3, message="3 checkins")

    work_plan = {
        "segments": [
            {"kind": "drive", "until_frac": 0.4},
            {"kind": "drive_work", "until_frac": 1.0},
            {"kind": "work", "duration_ms": 2000},
        ]
    }
    request = {
        "goals": {u: {"x": 30.0, "y": 20.0 * i} for i, u in enumerate(op_events)},
        "v": 2.0,
        "work_plan": {u: work_plan for u in op_events},
    }
    mission_id = harness.orchestrator.start_mission(
        "field pass", request, list(op_events)
    )
    wait_until(
        lambda: harness.store.get_mission(mission_id).status.terminal,
        timeout=30,
        message="field mission terminal",
    )
    mission = harness.store.get_mission(mission_id)
    assert mission.status is MissionStatus.SUCCEEDED, mission.failure_reason
    assert len(mission.assignments) == 3

    # mission success event must come after all three assignment successes
    entries = read_journal(tmp_path / "data" / "events.jsonl")
    success_seqs = [
        e.seq
        for e in entries
        if e.event.kind is EventKind.ASSIGNMENT_STATUS_CHANGED
        and e.event.body["status"] == "succeeded"
        and e.event.body["mission_id"] == mission_id
    ]
    mission_done = next(
        e.seq
        for e in entries
        if e.event.kind is EventKind.MISSION_STATUS_CHANGED
        and e.event.body["mission_id"] == mission_id
        and e.event.body["status"] == "succeeded"
    )
    assert len(success_seqs) == 3
    assert max(success_seqs) < mission_done

    # payload structure per agent: drive; drive+work concurrent; final work --
    # and the concurrent step's two operations both end before step 3 starts
    for uuid, events in op_events.items():
        names = [f"{n}:{p}" for n, p, _ in events]
        assert names[0] == "drive:start" and "work:start" in names, names
        times = {}
        drive_spans = [
            (t1, t2)
            for (n1, p1, t1), (n2, p2, t2) in zip(events, events[1:])
            if n1 == "drive" and p1 == "start" and n2 == "drive" and p2 == "end"
        ]
        starts = [(n, t) for n, p, t in events if p == "start"]
        ends = [(n, t) for n, p, t in events if p == "end"]
        assert len(starts) == 4 and len(ends) == 4, names  # drive, drive, work, work
        drive2_start = starts[1][1]
        drive2_end = [t for n, t in ends if n == "drive"][1]
        work1_start = [t for n, t in starts if n == "work"][0]
        work1_end = [t for n, t in ends if n == "work"][0]
        work2_start = [t for n, t in starts if n == "work"][1]
        # step 2 ops overlap
        assert work1_start < drive2_end, f"{uuid}: no concurrency in step 2"
        # step 3 starts only when both are done
        assert work2_start >= max(drive2_end, work1_end) - 1e-3, uuid

    for runtime in agents:
        runtime.stop()
    harness.stop()
    broker.close()
    ok(3, "3 assignments dispatched; drive+work ran concurrently and step 3 waited for both")


# ---------------------------------------------------------------------------
# 4. permission matrix


def test_criterion_4_permission_matrix(tmp_path):
    # (a) enforcement primitive over all 4 domains x both effects
    allowed = set()
    for domain in ServiceDomain:
        for effect in ("write_map", "target_agent"):
            try:
                enforce_response_effects(domain, {effect})
                allowed.add((domain.value, effect))
            except PermissionViolation:
                pass
    assert allowed == {
        ("map_server", "write_map"),
        ("assignment_planner", "target_agent"),
    }

    # (b) end-to-end fuzz over the three orchestratable domains
    broker = Broker()
    harness = TowerHarness(broker, tmp_path / "data")
    delta = {
        "update": [
            {
                "object_id": "zone",
                "object_type": "work_area",
                "geometry": [{"x": 0, "y": 0}, {"x": 1, "y": 0}, {"x": 1, "y": 1}],
                "metadata": {},
            }
        ],
        "delete": [],
    }
    assignment_result = {
        "assignments": [
            {
                "agent_uuid": "t1",
                "payload": {"steps": [{"operations": [{"module": "noop", "params": {}}]}]},
            }
        ]
    }
    cases = {
        # (service name, domain, handler result, apply_result, expected outcome)
        "map-write-ok": (ServiceDomain.MAP_SERVER, delta, ApplyResult.MAP_WRITE, "succeeded"),
        "map-target-denied": (ServiceDomain.MAP_SERVER, assignment_result, ApplyResult.NONE, "failed"),
        "planner-target-ok": (
            ServiceDomain.ASSIGNMENT_PLANNER, assignment_result,
            ApplyResult.ASSIGNMENT_SOURCE, "succeeded",
        ),
        "planner-map-denied": (
            ServiceDomain.ASSIGNMENT_PLANNER, {"map_update": delta}, ApplyResult.NONE, "failed",
        ),
        "storage-map-denied": (
            ServiceDomain.STORAGE_SERVER, {"stored": True, "map_update": delta},
            ApplyResult.NONE, "failed",
        ),
        "storage-target-denied": (
            ServiceDomain.STORAGE_SERVER, {"stored": True, **assignment_result},
            ApplyResult.NONE, "failed",
        ),
    }
    for name, (domain, result, apply_result, _) in cases.items():
        harness.add_service(name, domain, lambda doc, result=result: result)
        needs_agents = apply_result is ApplyResult.ASSIGNMENT_SOURCE
        harness.registry.upsert_recipe(
            MissionRecipe(
                f"recipe-{name}", "",
                (RecipeStep("s1", name, 1, apply_result=apply_result),),
                requires_agents=needs_agents,
            )
        )
    harness.start()
    agent = FakeAgent(broker, "t1").start()
    wait_until(lambda: "t1" in harness.store.agents)

    denied_revisions = []
    outcomes = {}
    for name, (domain, result, apply_result, expected) in cases.items():
        revision_before = harness.store.revision
        agents = ["t1"] if apply_result is ApplyResult.ASSIGNMENT_SOURCE else []
        mission_id = harness.orchestrator.start_mission(f"recipe-{name}", {}, agents)
        wait_until(
            lambda: harness.store.get_mission(mission_id).status.terminal,
            timeout=20,
            message=name,
        )
        mission = harness.store.get_mission(mission_id)
        outcomes[name] = mission.status.value
        assert mission.status.value == expected, (name, mission.failure_reason)
        if expected == "failed":
            assert "PermissionViolation" in mission.failure_reason, (name, mission.failure_reason)
            denied_revisions.append(harness.store.revision - revision_before)
        # ensure the agent is free again for the next case
        wait_until(
            lambda: harness.store.agents["t1"].reserved_by is None, timeout=10
        )
        wait_until(lambda: agent.status == "free", timeout=10)

    assert denied_revisions == [0, 0, 0, 0], "a denied case mutated the yard"
    assert sum(1 for v in outcomes.values() if v == "succeeded") == 2
    agent.stop()
    harness.stop()
    broker.close()
    ok(4, "exactly map_server+write_map and assignment_planner+target_agent allowed; 0 denied mutations")


# ---------------------------------------------------------------------------
# 5. JOB-ID polling


def test_criterion_5_job_id_polling(tmp_path):
    broker = Broker()
    harness = TowerHarness(broker, tmp_path / "data")
    slow = harness.add_service(
        "slow-svc", ServiceDomain.STORAGE_SERVER, lambda doc: {"stored": True},
        mode="slow", delay_ms=2500, poll_interval_ms=1000, result_timeout_ms=90_000,
    )
    stuck = harness.add_service(
        "stuck-svc", ServiceDomain.STORAGE_SERVER, lambda doc: {"stored": True},
        mode="slow", never_ready=True, poll_interval_ms=1000, result_timeout_ms=5000,
    )
    fast = harness.add_service(
        "fast-svc", ServiceDomain.STORAGE_SERVER, lambda doc: {"stored": True},
    )
    for name in ("slow-svc", "stuck-svc", "fast-svc"):
        harness.registry.upsert_recipe(
            MissionRecipe(f"r-{name}", "", (RecipeStep("s", name, 1),), requires_agents=False)
        )
    harness.start()

    # slow service: ready after 2.5 s, polled at 1 s -> exactly 3 GETs
    m_slow = harness.orchestrator.start_mission("r-slow-svc", {}, [])
    wait_until(lambda: harness.store.get_mission(m_slow).status.terminal, timeout=30)
    assert harness.store.get_mission(m_slow).status is MissionStatus.SUCCEEDED
    assert list(slow.get_counts.values()) == [3], slow.get_counts

    # never-ready service with 5 s timeout: mission failed, DELETE observed
    m_stuck = harness.orchestrator.start_mission("r-stuck-svc", {}, [])
    wait_until(lambda: harness.store.get_mission(m_stuck).status.terminal, timeout=30)
    mission = harness.store.get_mission(m_stuck)
    assert mission.status is MissionStatus.FAILED
    assert "JobTimeout" in mission.failure_reason
    polls = list(stuck.get_counts.values())[0]
    assert 4 <= polls <= 5, polls
    assert len(stuck.deleted_job_ids) == 1

    # fast service: synchronous, zero polls
    m_fast = harness.orchestrator.start_mission("r-fast-svc", {}, [])
    wait_until(lambda: harness.store.get_mission(m_fast).status.terminal, timeout=30)
    assert harness.store.get_mission(m_fast).status is MissionStatus.SUCCEEDED
    assert fast.get_counts == {}

    harness.stop()
    broker.close()
    ok(5, "slow ready on 3rd poll; never-ready timed out with DELETE; fast had 0 polls")


# ---------------------------------------------------------------------------
# 6. broker conformance


def test_criterion_6_broker_conformance():
    from test_broker import MATCH_TABLE

    assert len(MATCH_TABLE) >= 10
    for pattern, key, expected in MATCH_TABLE:
        assert topic_matches(pattern, key) is expected, (pattern, key)

    broker = Broker()
    sub = broker.subscribe("load.#")
    n_publishers, n_msgs = 10, 1000

    def pump(pid):
        for i in range(n_msgs):
            broker.publish(
                Envelope(routing_key=f"load.p{pid}", msg_type="t", body={"pid": pid, "i": i})
            )

    threads = [threading.Thread(target=pump, args=(pid,)) for pid in range(n_publishers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    seen: dict[str, int] = {}
    for _ in range(n_publishers * n_msgs):
        envelope = sub.get(timeout=10)
        expected = seen.get(envelope.routing_key, 0)
        assert envelope.body["i"] == expected, f"FIFO violated on {envelope.routing_key}"
        seen[envelope.routing_key] = expected + 1
    assert all(count == n_msgs for count in seen.values())
    broker.close()
    ok(6, f"{len(MATCH_TABLE)} matching cases exact; FIFO held for 10x1000 concurrent messages")


# ---------------------------------------------------------------------------
# 7. crash recovery


def test_criterion_7_crash_recovery(tmp_path):
    data_dir = tmp_path / "data"
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()

    def make_tower():
        return Tower(
            TowerConfig(port=port, data_dir=data_dir, reserve_timeout_ms=10_000)
        ).start()

    tower1 = make_tower()
    server1 = TowerServer(tower1).start()

    # services live outside the tower and survive its crash
    from yardtower.model import ServiceRegistration
    from yardtower.services import JobTable, ServiceServer

    def planner_handler(doc):
        return {
            "assignments": [
                {
                    "agent_uuid": "truck1",
                    "payload": {
                        "steps": [
                            {
                                "operations": [
                                    {
                                        "module": "drive",
                                        "params": {
                                            "trajectory": {
                                                "samples": [
                                                    {"x": 0, "y": 0, "heading": 0, "t": 0},
                                                    {"x": 20, "y": 0, "heading": 0, "t": 10_000},
                                                ]
                                            }
                                        },
                                    }
                                ]
                            }
                        ]
                    },
                }
            ]
        }

    planner_table = JobTable(planner_handler)
    stuck_table = JobTable(lambda doc: {"stored": True}, mode="slow", never_ready=True)
    reg_p = tower1.registry.register_service(
        "planner", ServiceDomain.ASSIGNMENT_PLANNER, "http://127.0.0.1:1", poll_interval_ms=200
    )
    planner_server = ServiceServer(planner_table, api_key=reg_p.api_key).start()
    reg_s = tower1.registry.register_service(
        "stuck", ServiceDomain.STORAGE_SERVER, "http://127.0.0.1:1",
        poll_interval_ms=500, result_timeout_ms=300_000,
    )
    stuck_server = ServiceServer(stuck_table, api_key=reg_s.api_key).start()
    # pin the registrations to the real ports; journaled, so the restarted
    # tower recovers working endpoints
    tower1.store.put_service(
        ServiceRegistration.from_doc({**reg_p.to_doc(), "base_url": planner_server.base_url})
    )
    tower1.store.put_service(
        ServiceRegistration.from_doc({**reg_s.to_doc(), "base_url": stuck_server.base_url})
    )

    tower1.registry.upsert_recipe(
        MissionRecipe(
            "deliver", "",
            (RecipeStep("plan", "planner", 1, apply_result=ApplyResult.ASSIGNMENT_SOURCE),),
        )
    )
    tower1.registry.upsert_recipe(
        MissionRecipe("export", "", (RecipeStep("s", "stuck", 1),), requires_agents=False)
    )

    # broker capture for the duplicate-assignment check (both tower lifetimes)
    assignment_publishes = []

    def tap(broker):
        sub = broker.subscribe("agent.*.assignment")

        def run():
            import queue as _q

            while True:
                try:
                    envelope = sub.get(timeout=0.2)
                except _q.Empty:
                    continue
                except Exception:
                    return
                assignment_publishes.append(envelope.body)

        threading.Thread(target=run, daemon=True).start()

    tap(tower1.broker)

    # a slow-driving agent over the wire (10 s sim at scale 2 = 5 s wall)
    agent = AgentRuntime.create(
        AgentConfig(
            agent_uuid="truck1",
            name="truck1",
            geometry=Geometry(4.0, 2.0),
            token=AGENT_TOKEN,
            broker_url=f"ws://127.0.0.1:{port}/ws/broker",
            clock_scale=2.0,
            start_pose=Pose(0, 0, 0),
        )
    )
    agent.link.backoff_initial_s = 0.1
    agent.start()
    wait_until(lambda: "truck1" in tower1.store.agents, message="checkin")

    executing_id = tower1.orchestrator.start_mission("deliver", {}, ["truck1"])
    planning_id = tower1.orchestrator.start_mission("export", {}, [])
    wait_until(
        lambda: tower1.store.get_mission(executing_id).status is MissionStatus.EXECUTING,
        timeout=20,
        message="mission executing",
    )
    wait_until(
        lambda: tower1.store.get_mission(planning_id).status is MissionStatus.PLANNING,
        timeout=20,
        message="mission planning",
    )
    wait_until(lambda: agent.status.value == "busy", timeout=10, message="agent driving")

    # kill the tower mid-flight
    server1.stop()
    tower1.stop()

    tower2 = make_tower()
    tap(tower2.broker)
    server2 = TowerServer(tower2).start()
    try:
        recovered = tower2.store.get_mission(planning_id)
        assert recovered.status is MissionStatus.FAILED
        assert recovered.failure_reason == "recovered"

        assert tower2.store.get_mission(executing_id).status is MissionStatus.EXECUTING
        wait_until(
            lambda: tower2.store.get_mission(executing_id).status.terminal,
            timeout=30,
            message="recovered mission completes",
        )
        assert tower2.store.get_mission(executing_id).status is MissionStatus.SUCCEEDED

        # dedup check over the full broker capture: one assignment_id per
        # (mission, agent), no matter how many times it was published
        ids_by_identity = {}
        for body in assignment_publishes:
            ids_by_identity.setdefault(
                (body["mission_id"], "truck1"), set()
            ).add(body["assignment_id"])
        assert all(len(ids) == 1 for ids in ids_by_identity.values()), ids_by_identity
        assert len(assignment_publishes) >= 1
    finally:
        agent.stop()
        server2.stop()
        tower2.stop()
        planner_server.stop()
        stuck_server.stop()
    ok(7, "executing mission resumed and completed; planning mission failed 'recovered'; no duplicate ids")


# ---------------------------------------------------------------------------
# 8. planner oracle equivalence


def test_criterion_8_planner_oracle_equivalence():
    from test_planner import bfs_reachable, dijkstra_cost, random_grid
    from yardtower.services import astar_grid

    started = time.monotonic()
    agreements = 0
    solvable = 0
    for seed in range(100):
        blocked = random_grid(seed, size=20, p_blocked=0.25)
        start, goal = (0, 0), (19, 19)
        found = astar_grid(blocked, start, goal)
        assert (found is not None) == bfs_reachable(blocked, start, goal), f"seed {seed}"
        agreements += 1
        if found is not None:
            solvable += 1
            assert found[1] == pytest.approx(dijkstra_cost(blocked, start, goal)), f"seed {seed}"
    elapsed = time.monotonic() - started
    assert agreements == 100
    assert elapsed < 5.0, f"oracle comparison took {elapsed:.1f}s"
    ok(8, f"100/100 solvability agreement, {solvable} optimal-cost matches, {elapsed:.2f}s total")


# ---------------------------------------------------------------------------
# 9. agentless mission


def test_criterion_9_agentless_mission(tmp_path):
    broker = Broker()
    harness = TowerHarness(broker, tmp_path / "data")

    def map_handler(doc):
        return {
            "update": [
                {
                    "object_id": "parking-p7",
                    "object_type": "parking_slot",
                    "geometry": [{"x": 0, "y": 0}, {"x": 6, "y": 0}, {"x": 6, "y": 4}],
                    "metadata": {},
                }
            ],
            "delete": [],
        }

    harness.add_service("map-svc", ServiceDomain.MAP_SERVER, map_handler)
    harness.registry.upsert_recipe(
        MissionRecipe(
            "map-refresh", "",
            (RecipeStep("edit", "map-svc", 1, apply_result=ApplyResult.MAP_WRITE),),
            requires_agents=False,
        )
    )
    capture = broker.subscribe("agent.#")
    harness.start()
    revision_before = harness.store.revision
    mission_id = harness.orchestrator.start_mission("map-refresh", {}, [])
    wait_until(lambda: harness.store.get_mission(mission_id).status.terminal, timeout=20)
    mission = harness.store.get_mission(mission_id)
    assert mission.status is MissionStatus.SUCCEEDED, mission.failure_reason
    assert harness.store.revision == revision_before + 1
    assert capture.drain() == [], "agent traffic observed for an agentless mission"
    harness.stop()
    broker.close()
    ok(9, "agentless mission succeeded, revision +1, zero agent.* traffic")
