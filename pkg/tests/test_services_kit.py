import time

import httpx
import pytest

from yardtower.services import HandlerFailure, JobTable, ServiceServer
from yardtower.services.mapsvc import map_handler
from yardtower.services.storage import StorageExporter

KEY = "test-key"


@pytest.fixture
def fast_service():
    server = ServiceServer(JobTable(lambda doc: {"echo": doc.get("request")}), api_key=KEY).start()
    yield server
    server.stop()


def post_job(server, body=None, key=KEY):
    return httpx.post(
        f"{server.base_url}/api/jobs", json=body or {"request": {"n": 1}}, headers={"x-api-key": key}
    )


def get_job(server, job_id, key=KEY):
    return httpx.get(f"{server.base_url}/api/jobs/{job_id}", headers={"x-api-key": key})


def test_fast_handler_responds_ready_inline(fast_service):
    resp = post_job(fast_service)
    assert resp.status_code == 201
    assert resp.json() == {"status": "ready", "result": {"echo": {"n": 1}}}


def test_bad_api_key_is_401(fast_service):
    assert post_job(fast_service, key="nope").status_code == 401
    assert get_job(fast_service, "whatever", key="nope").status_code == 401


def test_fast_handler_failure_reports_failed_status():
    def bad(doc):
        raise HandlerFailure("broken input")

    server = ServiceServer(JobTable(bad), api_key=KEY).start()
    try:
        body = post_job(server).json()
        assert body == {"status": "failed", "reason": "broken input"}
    finally:
        server.stop()


def test_slow_handler_pending_then_ready():
    table = JobTable(lambda doc: {"ok": True}, mode="slow", delay_ms=250)
    server = ServiceServer(table, api_key=KEY).start()
    try:
        body = post_job(server).json()
        assert body["status"] == "pending"
        job_id = body["job_id"]
        assert get_job(server, job_id).json()["status"] == "pending"
        deadline = time.time() + 5
        while time.time() < deadline:
            doc = get_job(server, job_id).json()
            if doc["status"] != "pending":
                break
            time.sleep(0.05)
        assert doc == {"status": "ready", "result": {"ok": True}}
    finally:
        server.stop()


def test_get_unknown_job_is_404(fast_service):
    assert get_job(fast_service, "nope").status_code == 404


def test_delete_pending_job_cancels():
    table = JobTable(lambda doc: {"ok": True}, mode="slow", never_ready=True)
    server = ServiceServer(table, api_key=KEY).start()
    try:
        job_id = post_job(server).json()["job_id"]
        resp = httpx.delete(f"{server.base_url}/api/jobs/{job_id}", headers={"x-api-key": KEY})
        assert resp.status_code == 204
        doc = get_job(server, job_id).json()
        assert doc["status"] == "failed" and doc["reason"] == "canceled"
        assert job_id in table.deleted_job_ids
    finally:
        server.stop()


def test_terminal_job_expires_to_410():
    table = JobTable(lambda doc: {"ok": True}, expiry_ms=50)
    server = ServiceServer(table, api_key=KEY).start()
    try:
        # fast mode returns inline and records nothing, so exercise expiry in
        # slow mode with no delay
        table2 = JobTable(lambda doc: {"ok": True}, mode="slow", delay_ms=0, expiry_ms=50)
        server2 = ServiceServer(table2, api_key=KEY).start()
        try:
            job_id = post_job(server2).json()["job_id"]
            deadline = time.time() + 5
            while time.time() < deadline:
                if get_job(server2, job_id).json().get("status") == "ready":
                    break
                time.sleep(0.02)
            time.sleep(0.1)
            assert get_job(server2, job_id).status_code == 410
        finally:
            server2.stop()
    finally:
        server.stop()


# -- bundled handlers ----------------------------------------------------


def test_map_handler_echoes_validated_delta():
    doc = {
        "request": {
            "set": [
                {
                    "object_id": "gate2",
                    "object_type": "gate",
                    "geometry": [{"x": 0, "y": 0}, {"x": 1, "y": 0}, {"x": 1, "y": 1}],
                    "metadata": {},
                }
            ],
            "remove": ["old"],
        }
    }
    delta = map_handler(doc)
    assert len(delta["update"]) == 1 and delta["delete"] == ["old"]


def test_map_handler_rejects_two_vertex_polygon():
    doc = {
        "request": {
            "set": [
                {
                    "object_id": "bad",
                    "object_type": "obstacle",
                    "geometry": [{"x": 0, "y": 0}, {"x": 1, "y": 1}],
                }
            ]
        }
    }
    with pytest.raises(HandlerFailure):
        map_handler(doc)


def test_map_handler_empty_edit_gives_empty_delta():
    assert map_handler({"request": {}}) == {"update": [], "delete": []}


def test_storage_appends_in_order_and_reports_bytes(tmp_path):
    exporter = StorageExporter(tmp_path)
    r1 = exporter({"request": {"seq": 1}, "context": {}})
    r2 = exporter({"request": {"seq": 2}, "context": {}})
    assert r1["stored"] and r1["bytes"] > 0
    assert r2["stored"]
    files = list(tmp_path.glob("yard-*.jsonl"))
    assert len(files) == 1
    lines = files[0].read_text().splitlines()
    assert len(lines) == 2
    assert '"seq":1' in lines[0] and '"seq":2' in lines[1]
