"""yardctl: scenario runner and operator tool.

Subcommands:
    run SCENARIO            boot tower+services+agents, run the mission
                            script, write a report, exit 0 on success
    tower                   run a bare tower + gateway until interrupted
    service run --config F  run one reference service from a config file
    agent run --config F    run one simulated agent from a config file
    services list|register  catalog admin over the gateway API
    recipes apply FILE      upsert a recipe over the gateway API
    missions create|watch   dispatch or follow missions

Gateway commands read the base url from --url or $YARDCTL_URL and the bearer
token from $YARDCTL_TOKEN. Auth failures exit 4.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import httpx

EXIT_AUTH = 4


def _fail(message: str, code: int) -> int:
    print(message, file=sys.stderr)
    return code


def _client(args) -> httpx.Client:
    token = os.environ.get("YARDCTL_TOKEN", "")
    return httpx.Client(
        base_url=args.url,
        headers={"Authorization": f"Bearer {token}"},
        timeout=30.0,
    )


def _check_auth(resp: httpx.Response) -> None:
    if resp.status_code in (401, 403):
        raise PermissionError("unauthorized")


def cmd_run(args) -> int:
    from .scenario import run_scenario

    result = run_scenario(
        args.scenario,
        data_dir=args.data_dir,
        spawn=args.spawn,
        seed=args.seed,
        report_path=args.report,
        hold=args.hold,
    )
    if result.report.get("error"):
        print(result.report["error"], file=sys.stderr)
    else:
        print(json.dumps(result.report, indent=2))
    return result.exit_code


def cmd_tower(args) -> int:
    from .tower import PortInUse, Tower, TowerConfig, TowerServer

    config = TowerConfig(
        host=args.host,
        port=args.port,
        data_dir=args.data_dir,
        operator_token=args.operator_token,
        admin_token=args.admin_token,
        agent_token=args.agent_token,
    )
    tower = Tower(config).start()
    try:
        server = TowerServer(tower).start()
    except PortInUse as exc:
        tower.stop()
        return _fail(f"port conflict: {exc}", 3)
    print(f"tower listening on {server.base_url}")
    print(f"  events stream: {server.events_ws_url}")
    print(f"  broker bridge: {server.broker_ws_url}")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        tower.stop()
    return 0


def cmd_service_run(args) -> int:
    from .services import build_service

    with open(args.config, encoding="utf-8") as fh:
        config = json.load(fh)
    server = build_service(config).start()
    print(f"service {config.get('name')} ({config.get('kind')}) on {server.base_url}")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        server.stop()
    return 0


def cmd_agent_run(args) -> int:
    from .agent import AgentConfig, AgentRuntime
    from .model import Geometry, Pose

    with open(args.config, encoding="utf-8") as fh:
        doc = json.load(fh)
    config = AgentConfig(
        agent_uuid=doc["uuid"],
        name=doc.get("name", doc["uuid"]),
        geometry=Geometry.from_doc(doc.get("geometry", {"length_m": 4.0, "width_m": 2.0})),
        token=doc.get("token", "agent-secret"),
        broker_url=doc["broker_url"],
        sensor_rate_hz=float(doc.get("sensor_rate_hz", 10.0)),
        clock_scale=float(doc.get("clock_scale", 1.0)),
        start_pose=Pose.from_doc(doc["start_pose"]) if doc.get("start_pose") else None,
    )
    runtime = AgentRuntime.create(config).start()
    print(f"agent {config.agent_uuid} connected to {config.broker_url}")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        runtime.stop()
    return 0


def cmd_services_list(args) -> int:
    with _client(args) as client:
        resp = client.get("/api/services")
        _check_auth(resp)
        services = resp.json()
    print(f"{'NAME':<24} {'DOMAIN':<20} {'ENABLED':<8} URL")
    for svc in services:
        print(
            f"{svc['service_name']:<24} {svc['domain']:<20} "
            f"{str(svc['enabled']).lower():<8} {svc['base_url']}"
        )
    return 0


def cmd_services_register(args) -> int:
    with _client(args) as client:
        resp = client.post(
            "/api/admin/services",
            json={
                "service_name": args.name,
                "domain": args.domain,
                "base_url": args.base_url,
                "result_timeout_ms": args.timeout_ms,
                "poll_interval_ms": args.poll_ms,
            },
        )
        _check_auth(resp)
        if resp.status_code != 201:
            return _fail(f"register failed: {resp.status_code} {resp.text}", 1)
        doc = resp.json()
    print(f"registered {doc['service_name']}")
    print(f"api_key (shown once): {doc['api_key']}")
    return 0


def cmd_recipes_apply(args) -> int:
    with open(args.file, encoding="utf-8") as fh:
        recipe = json.load(fh)
    with _client(args) as client:
        resp = client.post("/api/admin/recipes", json=recipe)
        _check_auth(resp)
        if resp.status_code != 201:
            return _fail(f"apply failed: {resp.status_code} {resp.text}", 1)
    print(f"201 applied recipe {recipe.get('name')!r}")
    return 0


def cmd_missions_create(args) -> int:
    request = json.loads(args.request) if args.request else {}
    agents = [a for a in (args.agents or "").split(",") if a]
    with _client(args) as client:
        resp = client.post(
            "/api/missions",
            json={"recipe_name": args.recipe, "request": request, "agent_uuids": agents},
        )
        _check_auth(resp)
        if resp.status_code != 201:
            return _fail(f"create failed: {resp.status_code} {resp.text}", 1)
        print(resp.json()["mission_id"])
    return 0


def cmd_missions_watch(args) -> int:
    from websockets.sync.client import connect as ws_connect

    token = os.environ.get("YARDCTL_TOKEN", "")
    ws_url = args.url.replace("http://", "ws://").replace("https://", "wss://") + "/ws/events"
    try:
        with ws_connect(ws_url) as ws:
            ws.send(json.dumps({"token": token, "topics": ["mission_state"]}))
            # the stream only carries changes; print the current state first
            with _client(args) as client:
                resp = client.get(f"/api/missions/{args.mission_id}")
                _check_auth(resp)
                if resp.status_code == 404:
                    return _fail("unknown mission", 1)
                status = resp.json()["status"]
            print(status)
            while status not in ("succeeded", "failed", "canceled"):
                event = json.loads(ws.recv(timeout=args.timeout_s))
                body = event["body"]
                if (
                    body["kind"] == "mission_status_changed"
                    and body["body"]["mission_id"] == args.mission_id
                ):
                    status = body["body"]["status"]
                    print(status)
    except TimeoutError:
        return _fail("timed out waiting for mission events", 1)
    except Exception as exc:
        rcvd = getattr(exc, "rcvd", None)
        if rcvd is not None and getattr(rcvd, "code", 0) == 4001:
            return _fail("unauthorized", EXIT_AUTH)
        raise
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="yardctl", description="yard control tower toolkit")
    parser.add_argument(
        "--url",
        default=os.environ.get("YARDCTL_URL", "http://127.0.0.1:8700"),
        help="tower gateway base url",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario file")
    run_p.add_argument("scenario")
    run_p.add_argument("--data-dir", default=None)
    run_p.add_argument("--spawn", action="store_true", help="services as subprocesses")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--report", default=None, help="write report JSON here")
    run_p.add_argument("--hold", action="store_true", help="keep running after the script")
    run_p.set_defaults(func=cmd_run)

    tower_p = sub.add_parser("tower", help="run a tower + gateway")
    tower_p.add_argument("--host", default="127.0.0.1")
    tower_p.add_argument("--port", type=int, default=8700)
    tower_p.add_argument("--data-dir", default="data")
    tower_p.add_argument("--operator-token", default="operator-token")
    tower_p.add_argument("--admin-token", default="admin-token")
    tower_p.add_argument("--agent-token", default="agent-secret")
    tower_p.set_defaults(func=cmd_tower)

    service_p = sub.add_parser("service", help="reference services")
    service_sub = service_p.add_subparsers(dest="service_command", required=True)
    service_run = service_sub.add_parser("run", help="run one service from config")
    service_run.add_argument("--config", required=True)
    service_run.set_defaults(func=cmd_service_run)

    agent_p = sub.add_parser("agent", help="simulated agents")
    agent_sub = agent_p.add_subparsers(dest="agent_command", required=True)
    agent_run = agent_sub.add_parser("run", help="run one agent from config")
    agent_run.add_argument("--config", required=True)
    agent_run.set_defaults(func=cmd_agent_run)

    services_p = sub.add_parser("services", help="service catalog")
    services_sub = services_p.add_subparsers(dest="services_command", required=True)
    services_sub.add_parser("list", help="list registered services").set_defaults(
        func=cmd_services_list
    )
    reg_p = services_sub.add_parser("register", help="register a service")
    reg_p.add_argument("--name", required=True)
    reg_p.add_argument("--domain", required=True,
                       choices=["assignment_planner", "map_server", "storage_server", "automaton"])
    reg_p.add_argument("--base-url", required=True)
    reg_p.add_argument("--timeout-ms", type=int, default=90_000)
    reg_p.add_argument("--poll-ms", type=int, default=1_000)
    reg_p.set_defaults(func=cmd_services_register)

    recipes_p = sub.add_parser("recipes", help="mission recipes")
    recipes_sub = recipes_p.add_subparsers(dest="recipes_command", required=True)
    apply_p = recipes_sub.add_parser("apply", help="upsert a recipe from a JSON file")
    apply_p.add_argument("file")
    apply_p.set_defaults(func=cmd_recipes_apply)

    missions_p = sub.add_parser("missions", help="missions")
    missions_sub = missions_p.add_subparsers(dest="missions_command", required=True)
    create_p = missions_sub.add_parser("create", help="dispatch a mission")
    create_p.add_argument("--recipe", required=True)
    create_p.add_argument("--agents", default="", help="comma-separated agent uuids")
    create_p.add_argument("--request", default="", help="JSON request payload")
    create_p.set_defaults(func=cmd_missions_create)
    watch_p = missions_sub.add_parser("watch", help="follow a mission until terminal")
    watch_p.add_argument("mission_id")
    watch_p.add_argument("--timeout-s", type=float, default=120.0)
    watch_p.set_defaults(func=cmd_missions_watch)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PermissionError:
        return _fail("unauthorized", EXIT_AUTH)
    except httpx.HTTPError as exc:
        return _fail(f"connection error: {exc}", 1)


if __name__ == "__main__":
    raise SystemExit(main())
