"""Control tower composition root.

A Tower wires broker + state store + registry + orchestrator in one process
(recovering from the journal when a data dir is given); TowerServer puts the
gateway app in front of it on a real port. Both are restartable: killing a
tower and constructing a new one over the same data dir is the crash
recovery path.
"""
from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import uvicorn

from .broker import Broker
from .clock import Clock
from .errors import YardError
from .orchestrator import Orchestrator, OrchestratorConfig
from .registry import ServiceRegistry
from .store import StateStore


class PortInUse(YardError):
    pass


@dataclass
class TowerConfig:
    host: str = "127.0.0.1"
    port: int = 0
    data_dir: str | Path | None = None
    operator_token: str = "operator-token"
    admin_token: str = "admin-token"
    agent_token: str = "agent-secret"
    reserve_timeout_ms: int = 30_000
    cancel_grace_ms: int = 10_000
    sensor_journal_every: int = 10
    snapshot_every: int = 1000
    ws_backlog: int = 1000


class Tower:
    def __init__(self, config: TowerConfig | None = None):
        self.config = config or TowerConfig()
        self.clock = Clock()
        self.broker = Broker()
        self.store = StateStore(
            self.config.data_dir,
            self.broker,
            self.clock,
            agent_token=self.config.agent_token,
            sensor_journal_every=self.config.sensor_journal_every,
            snapshot_every=self.config.snapshot_every,
        )
        self.registry = ServiceRegistry(self.store)
        self.orchestrator = Orchestrator(
            self.store,
            self.registry,
            self.broker,
            self.clock,
            OrchestratorConfig(
                reserve_timeout_ms=self.config.reserve_timeout_ms,
                cancel_grace_ms=self.config.cancel_grace_ms,
            ),
        )

    def start(self) -> "Tower":
        self.orchestrator.start()
        return self

    def stop(self) -> None:
        self.orchestrator.stop()
        self.broker.close()
        self.store.close()


class TowerServer:
    """Uvicorn front for a Tower, run in a daemon thread."""

    def __init__(self, tower: Tower):
        from .gateway import build_app

        self.tower = tower
        self._app = build_app(tower)
        self._server: uvicorn.Server | None = None
        self._thread: threading.Thread | None = None
        self.port: int | None = None

    @property
    def base_url(self) -> str:
        return f"http://{self.tower.config.host}:{self.port}"

    @property
    def broker_ws_url(self) -> str:
        return f"ws://{self.tower.config.host}:{self.port}/ws/broker"

    @property
    def events_ws_url(self) -> str:
        return f"ws://{self.tower.config.host}:{self.port}/ws/events"

    def start(self, timeout_s: float = 10.0) -> "TowerServer":
        host, port = self.tower.config.host, self.tower.config.port
        if port:
            probe = socket.socket()
            try:
                probe.bind((host, port))
            except OSError as exc:
                raise PortInUse(f"{host}:{port}: {exc}") from None
            finally:
                probe.close()
        config = uvicorn.Config(
            self._app, host=host, port=port, log_level="warning", ws="auto", lifespan="off"
        )
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self._thread.start()
        deadline = time.monotonic() + timeout_s
        while not self._server.started:
            if time.monotonic() > deadline or not self._thread.is_alive():
                raise YardError("gateway server failed to start")
            time.sleep(0.01)
        self.port = self._server.servers[0].sockets[0].getsockname()[1]
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=10)
