"""Shared microservice kit: the minimalist CRUD job endpoint.

Every reference service wraps its handler with this kit and speaks the same
wire contract the orchestrator expects:

    POST   /api/jobs          header x-api-key, body = service request doc
        201 {"status": "ready", "result": {...}}        fast handlers
        201 {"status": "pending", "job_id": "..."}      slow handlers
        201 {"status": "failed", "reason": "..."}       fast handler failure
    GET    /api/jobs/{id}     200 {"status": ..., "result"?, "reason"?}
    DELETE /api/jobs/{id}     204, best-effort cancel of pending jobs

401 on a bad key, 404 for unknown jobs, 410 once a terminal job has expired
(10 minutes after completion).
"""
from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

from ..errors import YardError
from ..model import new_id

EXPIRY_MS = 600_000


class HandlerFailure(YardError):
    """Raised by a job handler to fail the job with a reason."""


Handler = Callable[[dict], dict]


@dataclass
class JobRecord:
    job_id: str
    status: str = "pending"  # pending | ready | failed
    result: dict | None = None
    reason: str | None = None
    terminal_at: float | None = None
    cancel: threading.Event = field(default_factory=threading.Event)


class JobTable:
    """Job lifecycle shared between the HTTP layer and worker threads."""

    def __init__(self, handler: Handler, *, mode: str = "fast", delay_ms: float = 0.0,
                 never_ready: bool = False, expiry_ms: float = EXPIRY_MS):
        if mode not in ("fast", "slow"):
            raise ValueError(f"mode must be fast or slow, got {mode!r}")
        self.handler = handler
        self.mode = mode
        self.delay_ms = delay_ms
        self.never_ready = never_ready
        self.expiry_ms = expiry_ms
        self._lock = threading.Lock()
        self._jobs: dict[str, JobRecord] = {}
        self.deleted_job_ids: list[str] = []
        self.get_counts: dict[str, int] = {}

    def submit(self, doc: dict) -> dict:
        if self.mode == "fast":
            try:
                result = self.handler(doc)
            except HandlerFailure as exc:
                return {"status": "failed", "reason": str(exc)}
            return {"status": "ready", "result": result}
        job = JobRecord(job_id=new_id())
        with self._lock:
            self._jobs[job.job_id] = job
        worker = threading.Thread(target=self._run, args=(job, doc), daemon=True)
        worker.start()
        return {"status": "pending", "job_id": job.job_id}

    def _run(self, job: JobRecord, doc: dict) -> None:
        deadline = time.monotonic() + self.delay_ms / 1000.0
        while self.never_ready or time.monotonic() < deadline:
            if job.cancel.wait(timeout=0.05):
                return  # cancel() already finalized the record
        try:
            result = self.handler(doc)
        except HandlerFailure as exc:
            self._finish(job, "failed", reason=str(exc))
            return
        self._finish(job, "ready", result=result)

    def _finish(self, job: JobRecord, status: str, result: dict | None = None, reason: str | None = None) -> None:
        with self._lock:
            if job.status != "pending":
                return
            job.status = status
            job.result = result
            job.reason = reason
            job.terminal_at = time.monotonic() * 1000.0

    def get(self, job_id: str) -> JobRecord | None:
        with self._lock:
            self.get_counts[job_id] = self.get_counts.get(job_id, 0) + 1
            return self._jobs.get(job_id)

    def expired(self, job: JobRecord) -> bool:
        return (
            job.terminal_at is not None
            and time.monotonic() * 1000.0 > job.terminal_at + self.expiry_ms
        )

    def cancel(self, job_id: str) -> bool:
        with self._lock:
            self.deleted_job_ids.append(job_id)
            job = self._jobs.get(job_id)
            if job is None:
                return False
            if job.status == "pending":
                job.status = "failed"
                job.reason = "canceled"
                job.terminal_at = time.monotonic() * 1000.0
                job.cancel.set()
            return True


class _KitRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    table: JobTable
    api_key: str

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, code: int, doc: dict | None = None) -> None:
        body = json.dumps(doc).encode() if doc is not None else b""
        self.send_response(code)
        self.send_header("content-type", "application/json")
        self.send_header("content-length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def _authorized(self) -> bool:
        return self.headers.get("x-api-key") == self.api_key

    def do_POST(self):
        if self.path != "/api/jobs":
            return self._send(404, {"error": "not_found"})
        if not self._authorized():
            return self._send(401, {"error": "bad_api_key"})
        length = int(self.headers.get("content-length", 0))
        try:
            doc = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            return self._send(400, {"error": "bad_json"})
        self._send(201, self.table.submit(doc))

    def do_GET(self):
        if not self.path.startswith("/api/jobs/"):
            return self._send(404, {"error": "not_found"})
        if not self._authorized():
            return self._send(401, {"error": "bad_api_key"})
        job = self.table.get(self.path.rsplit("/", 1)[1])
        if job is None:
            return self._send(404, {"error": "unknown_job"})
        if self.table.expired(job):
            return self._send(410, {"error": "expired_job"})
        doc: dict = {"status": job.status}
        if job.result is not None:
            doc["result"] = job.result
        if job.reason is not None:
            doc["reason"] = job.reason
        self._send(200, doc)

    def do_DELETE(self):
        if not self.path.startswith("/api/jobs/"):
            return self._send(404, {"error": "not_found"})
        if not self._authorized():
            return self._send(401, {"error": "bad_api_key"})
        self.table.cancel(self.path.rsplit("/", 1)[1])
        self._send(204)


class ServiceServer:
    """One reference service process: a job table behind a threading HTTP
    server. ``port=0`` binds an ephemeral port (see ``.port`` after start)."""

    def __init__(self, table: JobTable, *, api_key: str, host: str = "127.0.0.1", port: int = 0):
        self.table = table
        handler = type(
            "BoundKitHandler", (_KitRequestHandler,), {"table": table, "api_key": api_key}
        )
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self.host = host
        self.port = self._httpd.server_address[1]
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "ServiceServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)
