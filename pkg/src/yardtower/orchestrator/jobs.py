"""Outbound microservice calls: synchronous submit and JOB-ID polling.

The wire contract is fixed: POST ``{base_url}/api/jobs`` with the request
document and an ``x-api-key`` header answers 201 with either the finished
result (``status: ready``), a failure, or ``status: pending`` plus a job
token. Pending jobs are then polled with GET every ``poll_interval_ms`` until
ready/failed or until ``result_timeout_ms`` has elapsed, at which point a
best-effort DELETE cancels the job server-side. Transient GET failures
(network errors, 5xx) count as polls and never fail the job before the
timeout does.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import httpx

from ..clock import Clock
from ..errors import YardError
from ..model import ServiceRegistration


class ServiceUnreachable(YardError):
    pass


class ServiceRejected(YardError):
    def __init__(self, status_code: int, detail: str = ""):
        self.status_code = status_code
        super().__init__(f"service rejected request: HTTP {status_code} {detail}".strip())


class JobFailed(YardError):
    pass


class JobTimeout(YardError):
    pass


@dataclass
class ServiceJob:
    job_token: str
    service_name: str
    mission_id: str
    step_id: str
    state: str = "pending"  # pending | ready | failed | timeout | canceled
    polls_made: int = 0
    dispatched_at: int = 0
    result: dict | None = None
    failure_reason: str | None = None


@dataclass(frozen=True)
class PollPolicy:
    poll_interval_ms: int
    result_timeout_ms: int


class _Transient(Exception):
    pass


class ServiceClient:
    """HTTP client for the job endpoint of registered services."""

    def __init__(self, timeout_s: float = 10.0):
        self._http = httpx.Client(timeout=timeout_s)

    def close(self) -> None:
        self._http.close()

    def submit(self, reg: ServiceRegistration, doc: dict) -> dict:
        try:
            resp = self._http.post(
                f"{reg.base_url}/api/jobs", json=doc, headers={"x-api-key": reg.api_key}
            )
        except httpx.HTTPError as exc:
            raise ServiceUnreachable(f"{reg.service_name}: {exc}") from None
        if resp.status_code != 201:
            raise ServiceRejected(resp.status_code, resp.text[:200])
        return resp.json()

    def _poll_once(self, reg: ServiceRegistration, job_token: str) -> dict:
        try:
            resp = self._http.get(
                f"{reg.base_url}/api/jobs/{job_token}", headers={"x-api-key": reg.api_key}
            )
        except httpx.HTTPError as exc:
            raise _Transient(str(exc)) from None
        if resp.status_code >= 500:
            raise _Transient(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            # the service lost or expired the job; that is final
            return {"status": "failed", "reason": f"HTTP {resp.status_code}"}
        return resp.json()

    def cancel(self, reg: ServiceRegistration, job_token: str) -> None:
        try:
            self._http.delete(
                f"{reg.base_url}/api/jobs/{job_token}", headers={"x-api-key": reg.api_key}
            )
        except httpx.HTTPError:
            pass  # best effort

    def poll_job(
        self,
        job: ServiceJob,
        reg: ServiceRegistration,
        policy: PollPolicy,
        clock: Clock,
        should_cancel: Callable[[], bool] | None = None,
    ) -> ServiceJob:
        """Drive a pending job to a final state. All outcomes are encoded in
        ``job.state``; this never raises."""
        start = clock.monotonic_ms()
        while True:
            clock.sleep_ms(policy.poll_interval_ms)
            if should_cancel is not None and should_cancel():
                job.state = "canceled"
                self.cancel(reg, job.job_token)
                return job
            if clock.monotonic_ms() - start > policy.result_timeout_ms:
                job.state = "timeout"
                self.cancel(reg, job.job_token)
                return job
            job.polls_made += 1
            try:
                doc = self._poll_once(reg, job.job_token)
            except _Transient:
                continue
            status = doc.get("status")
            if status == "ready":
                job.state = "ready"
                job.result = doc.get("result", {})
                return job
            if status == "failed":
                job.state = "failed"
                job.failure_reason = doc.get("reason", "service reported failure")
                return job
            # pending: keep polling
