"""HTTP and WebSocket surface for user apps and the dashboard.

Plain JSON over HTTP for commands and queries, one WebSocket endpoint
(``/ws/events``) broadcasting live domain events to user interfaces, and the
broker wire bridge (``/ws/broker``) for external agent processes. The
gateway holds no state of its own: every answer is a snapshot from the
store and every push is a mirrored domain event, so restarting it never
changes journalable state.
"""
from __future__ import annotations

import asyncio
import logging
import queue

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .broker import (
    InvalidPattern,
    MalformedFrame,
    SubscriptionClosed,
    decode_frame,
    encode_frame,
    keys,
)
from .broker.core import DuplicateMessageId
from .broker.envelope import Envelope
from .model import (
    AgentStatus,
    Connection,
    EventKind,
    MissionRecipe,
    MissionStatus,
    ServiceDomain,
)
from .orchestrator import (
    RecipeDegraded,
    RecipeRequiresAgents,
    UnknownRecipe,
)
from .registry import DuplicateName, InvalidUrl, UnknownService, ValidationFailed
from .store import AgentOffline, AgentUnavailable, AlreadyTerminal, UnknownAgent, UnknownMission

log = logging.getLogger(__name__)

# Which gateway stream topic carries each domain event kind.
TOPIC_OF_KIND = {
    EventKind.AGENT_CHECKED_IN: "agent_state",
    EventKind.AGENT_STATUS_CHANGED: "agent_state",
    EventKind.SENSOR_RECEIVED: "sensors",
    EventKind.MISSION_CREATED: "mission_state",
    EventKind.MISSION_STATUS_CHANGED: "mission_state",
    EventKind.STEP_DISPATCHED: "mission_state",
    EventKind.STEP_COMPLETED: "mission_state",
    EventKind.ASSIGNMENT_STATUS_CHANGED: "mission_state",
    EventKind.MAP_UPDATED: "map",
}
STREAM_TOPICS = ("agent_state", "sensors", "mission_state", "map")

CLOSE_AUTH = 4001
CLOSE_MALFORMED = 4002
CLOSE_BAD_TOPIC = 4003
CLOSE_BACKLOG = 4008


class ApiError(Exception):
    def __init__(self, status_code: int, error: str, **extra):
        self.status_code = status_code
        self.doc = {"error": error, **extra}
        super().__init__(error)


def _paginate(items: list, request: Request) -> list:
    try:
        limit = int(request.query_params.get("limit", 100))
        offset = int(request.query_params.get("offset", 0))
    except ValueError:
        raise ApiError(400, "bad_filter") from None
    return items[offset : offset + limit]


def build_app(tower) -> FastAPI:
    app = FastAPI(title="yard control tower", docs_url=None, redoc_url=None)
    store = tower.store
    registry = tower.registry
    orchestrator = tower.orchestrator
    config = tower.config

    @app.exception_handler(ApiError)
    async def on_api_error(request, exc: ApiError):
        return JSONResponse(exc.doc, status_code=exc.status_code)

    def role_of(request: Request) -> str:
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip()
        if token == config.admin_token:
            return "admin"
        if token == config.operator_token:
            return "operator"
        raise ApiError(401, "unauthorized")

    def require_admin(request: Request) -> None:
        if role_of(request) != "admin":
            raise ApiError(403, "forbidden")

    async def body_of(request: Request) -> dict:
        try:
            doc = await request.json()
        except Exception:
            raise ApiError(422, "schema", detail={"reason": "body is not JSON"}) from None
        if not isinstance(doc, dict):
            raise ApiError(422, "schema", detail={"reason": "body must be an object"})
        return doc

    # -- missions --------------------------------------------------------

    @app.post("/api/missions", status_code=201)
    async def create_mission(request: Request):
        role_of(request)
        body = await body_of(request)
        recipe_name = body.get("recipe_name")
        if not isinstance(recipe_name, str):
            raise ApiError(422, "schema", detail={"reason": "recipe_name required"})
        mission_request = body.get("request", {})
        agent_uuids = body.get("agent_uuids", [])
        if not isinstance(mission_request, dict) or not isinstance(agent_uuids, list):
            raise ApiError(422, "schema", detail={"reason": "bad request/agent_uuids"})
        try:
            mission_id = await asyncio.to_thread(
                orchestrator.start_mission, recipe_name, mission_request, agent_uuids
            )
        except UnknownRecipe:
            raise ApiError(404, "unknown_recipe") from None
        except UnknownAgent as exc:
            raise ApiError(404, "unknown_agent", agent=str(exc)) from None
        except AgentUnavailable as exc:
            raise ApiError(409, "agent_unavailable", agent=exc.agent_uuid) from None
        except AgentOffline as exc:
            raise ApiError(409, "agent_offline", agent=exc.agent_uuid) from None
        except RecipeDegraded:
            raise ApiError(409, "recipe_degraded") from None
        except RecipeRequiresAgents:
            raise ApiError(422, "agents_required") from None
        return {"mission_id": mission_id}

    @app.delete("/api/missions/{mission_id}", status_code=202)
    async def cancel_mission(mission_id: str, request: Request):
        role_of(request)
        try:
            await asyncio.to_thread(orchestrator.cancel_mission, mission_id)
        except UnknownMission:
            raise ApiError(404, "unknown_mission") from None
        except AlreadyTerminal:
            raise ApiError(409, "already_terminal") from None
        return {"mission_id": mission_id, "canceling": True}

    @app.get("/api/missions")
    def list_missions(request: Request):
        role_of(request)
        status = request.query_params.get("status")
        try:
            parsed = MissionStatus(status) if status else None
        except ValueError:
            raise ApiError(400, "bad_filter", detail={"status": status}) from None
        return _paginate([m.to_doc() for m in store.list_missions(parsed)], request)

    @app.get("/api/missions/{mission_id}")
    def get_mission(mission_id: str, request: Request):
        role_of(request)
        try:
            return store.get_mission(mission_id).to_doc()
        except UnknownMission:
            raise ApiError(404, "unknown_mission") from None

    # -- read-only state ---------------------------------------------------

    @app.get("/api/agents")
    def list_agents(request: Request):
        role_of(request)
        status = request.query_params.get("status")
        try:
            parsed = AgentStatus(status) if status else None
        except ValueError:
            raise ApiError(400, "bad_filter", detail={"status": status}) from None
        return _paginate([a.to_doc() for a in store.list_agents(parsed)], request)

    @app.get("/api/map")
    def get_map(request: Request):
        role_of(request)
        return store.yard_state()

    @app.get("/api/recipes")
    def list_recipes(request: Request):
        role_of(request)
        return _paginate(registry.list_recipes(), request)

    @app.get("/api/services")
    def list_services(request: Request):
        role_of(request)
        return _paginate(
            [s.to_doc(redact_key=True) for s in registry.list_services()], request
        )

    # -- admin -------------------------------------------------------------

    @app.post("/api/admin/services", status_code=201)
    async def register_service(request: Request):
        require_admin(request)
        body = await body_of(request)
        try:
            domain = ServiceDomain(body.get("domain", ""))
        except ValueError:
            raise ApiError(422, "schema", detail={"reason": "bad domain"}) from None
        name = body.get("service_name")
        base_url = body.get("base_url")
        if not isinstance(name, str) or not isinstance(base_url, str):
            raise ApiError(422, "schema", detail={"reason": "service_name and base_url required"})
        try:
            registration = registry.register_service(
                name,
                domain,
                base_url,
                result_timeout_ms=int(body.get("result_timeout_ms", 90_000)),
                poll_interval_ms=int(body.get("poll_interval_ms", 1_000)),
                subdomain=body.get("subdomain"),
            )
        except DuplicateName:
            raise ApiError(409, "duplicate_name") from None
        except InvalidUrl:
            raise ApiError(422, "invalid_url") from None
        # the one and only time the api_key is shown
        return registration.to_doc()

    @app.put("/api/admin/services/{name}")
    def update_service(name: str, request: Request, body: dict):
        require_admin(request)
        if "enabled" not in body:
            raise ApiError(422, "schema", detail={"reason": "enabled required"})
        try:
            registry.set_enabled(name, bool(body["enabled"]))
        except UnknownService:
            raise ApiError(404, "unknown_service") from None
        return registry.get_service(name).to_doc(redact_key=True)

    @app.delete("/api/admin/services/{name}")
    def delete_service(name: str, request: Request):
        require_admin(request)
        try:
            registry.remove_service(name)
        except UnknownService:
            raise ApiError(404, "unknown_service") from None
        return {"removed": name}

    @app.post("/api/admin/recipes", status_code=201)
    async def upsert_recipe(request: Request):
        require_admin(request)
        body = await body_of(request)
        try:
            recipe = MissionRecipe.from_doc(body)
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(422, "schema", detail={"reason": str(exc)}) from None
        try:
            registry.upsert_recipe(recipe)
        except ValidationFailed as exc:
            raise ApiError(
                422, "validation_failed", violations=[v.to_doc() for v in exc.violations]
            ) from None
        return {"name": recipe.name}

    @app.delete("/api/admin/recipes/{name}")
    def delete_recipe(name: str, request: Request):
        require_admin(request)
        if registry.get_recipe(name) is None:
            raise ApiError(404, "unknown_recipe")
        registry.remove_recipe(name)
        return {"removed": name}

    # -- live event stream ---------------------------------------------------

    @app.websocket("/ws/events")
    async def ws_events(ws: WebSocket):
        await ws.accept()
        try:
            hello = await ws.receive_json()
        except Exception:
            await ws.close(code=CLOSE_MALFORMED)
            return
        token = hello.get("token", "")
        if token not in (config.operator_token, config.admin_token):
            await ws.close(code=CLOSE_AUTH)
            return
        topics = hello.get("topics", list(STREAM_TOPICS))
        if not isinstance(topics, list) or not set(topics) <= set(STREAM_TOPICS):
            await ws.close(code=CLOSE_BAD_TOPIC)
            return
        wanted = set(topics)
        sub = tower.broker.subscribe(keys.ALL_EVENTS, max_backlog=config.ws_backlog)
        receiver = asyncio.create_task(ws.receive_text())  # detect client close
        try:
            while True:
                if receiver.done():
                    return
                try:
                    envelope = await asyncio.to_thread(sub.get, 0.25)
                except queue.Empty:
                    continue
                except SubscriptionClosed:
                    if sub.overflowed:
                        await ws.close(code=CLOSE_BACKLOG)
                    return
                event_doc = envelope.body
                topic = TOPIC_OF_KIND.get(EventKind(event_doc["kind"]))
                if topic is None or topic not in wanted:
                    continue
                await ws.send_json(
                    {"topic": topic, "ts": event_doc["ts"], "body": event_doc}
                )
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            sub.close()
            receiver.cancel()

    # -- broker wire bridge ----------------------------------------------------

    @app.websocket("/ws/broker")
    async def ws_broker(ws: WebSocket):
        await ws.accept()
        try:
            first = decode_frame(await ws.receive_text())
        except (MalformedFrame, WebSocketDisconnect):
            await ws.close(code=CLOSE_MALFORMED)
            return
        if first.msg_type != "auth" or first.body.get("token") != config.agent_token:
            await ws.close(code=CLOSE_AUTH)
            return
        agent_uuid = first.body.get("agent_uuid", "")
        await ws.send_text(
            encode_frame(
                Envelope(routing_key="control.auth", msg_type="auth_ok", body={})
            ).decode()
        )

        send_lock = asyncio.Lock()
        forwarders: list[asyncio.Task] = []

        async def forward(sub):
            try:
                while True:
                    try:
                        envelope = await asyncio.to_thread(sub.get, 0.25)
                    except queue.Empty:
                        continue
                    except SubscriptionClosed:
                        return
                    async with send_lock:
                        await ws.send_text(encode_frame(envelope).decode())
            except (WebSocketDisconnect, RuntimeError):
                pass

        subs = []
        try:
            while True:
                try:
                    frame = await ws.receive_text()
                except WebSocketDisconnect:
                    return
                try:
                    envelope = decode_frame(frame)
                except MalformedFrame:
                    await ws.close(code=CLOSE_MALFORMED)
                    return
                if envelope.msg_type == "subscribe":
                    try:
                        sub = tower.broker.subscribe(envelope.body.get("pattern", ""))
                    except InvalidPattern:
                        await ws.close(code=CLOSE_MALFORMED)
                        return
                    subs.append(sub)
                    forwarders.append(asyncio.create_task(forward(sub)))
                else:
                    try:
                        await asyncio.to_thread(tower.broker.publish, envelope)
                    except DuplicateMessageId:
                        await ws.close(code=CLOSE_MALFORMED)
                        return
        finally:
            for sub in subs:
                sub.close()
            for task in forwarders:
                task.cancel()
            if agent_uuid:
                tower.store.set_agent_connection(agent_uuid, Connection.OFFLINE)

    return app
