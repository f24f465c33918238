import queue
import socket
import time

import pytest

from conftest import AGENT_TOKEN, wait_until
from yardtower.broker.client import AuthFailed, WsLink
from yardtower.broker.envelope import Envelope
from yardtower.agent import AgentConfig, AgentRuntime
from yardtower.model import Connection, Geometry, Pose
from yardtower.tower import PortInUse, Tower, TowerConfig, TowerServer


@pytest.fixture
def served_tower(tmp_path):
    tower = Tower(TowerConfig(data_dir=tmp_path / "data", reserve_timeout_ms=5000))
    tower.start()
    server = TowerServer(tower).start()
    yield tower, server
    server.stop()
    tower.stop()


def make_link(server, uuid="w1", **kw):
    return WsLink(server.broker_ws_url, uuid, AGENT_TOKEN, backoff_initial_s=0.1, **kw)


def test_ws_link_round_trip(served_tower):
    tower, server = served_tower
    link = make_link(server)
    link.connect()
    try:
        sub = link.subscribe("loopback.#")
        time.sleep(0.2)
        tower.broker.publish(Envelope(routing_key="loopback.x", msg_type="t", body={"n": 7}))
        assert sub.get(timeout=5).body == {"n": 7}

        tap = tower.broker.subscribe("fromclient.#")
        link.publish(Envelope(routing_key="fromclient.y", msg_type="t", body={"m": 8}))
        assert tap.get(timeout=5).body == {"m": 8}
    finally:
        link.close()


def test_ws_link_bad_token_raises_auth_failed(served_tower):
    _, server = served_tower
    link = WsLink(server.broker_ws_url, "w1", "wrong-token", backoff_initial_s=0.1)
    with pytest.raises(AuthFailed):
        link.connect()


def test_ws_link_reconnects_after_server_restart(tmp_path):
    # pin a port so the restarted server is reachable at the same address
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()

    tower1 = Tower(TowerConfig(port=port, data_dir=tmp_path / "data"))
    tower1.start()
    server1 = TowerServer(tower1).start()

    reconnects = []
    link = WsLink(f"ws://127.0.0.1:{port}/ws/broker", "w1", AGENT_TOKEN, backoff_initial_s=0.1)
    link.on_connect = lambda: reconnects.append(time.monotonic())
    link.connect()
    sub = link.subscribe("ping.#")
    time.sleep(0.2)
    tower1.broker.publish(Envelope(routing_key="ping.a", msg_type="t", body={"gen": 1}))
    assert sub.get(timeout=5).body == {"gen": 1}

    server1.stop()
    tower1.stop()
    time.sleep(0.3)

    tower2 = Tower(TowerConfig(port=port, data_dir=tmp_path / "data"))
    tower2.start()
    server2 = TowerServer(tower2).start()
    try:
        wait_until(lambda: len(reconnects) >= 2, timeout=15, message="link reconnect")
        # re-subscribed on the new broker: messages flow again
        wait_until_published = time.time() + 5
        got = None
        while time.time() < wait_until_published:
            tower2.broker.publish(
                Envelope(routing_key="ping.b", msg_type="t", body={"gen": 2})
            )
            try:
                got = sub.get(timeout=0.5)
                break
            except queue.Empty:
                continue
        assert got is not None and got.body == {"gen": 2}
    finally:
        link.close()
        server2.stop()
        tower2.stop()


def test_agent_over_wire_marks_offline_on_disconnect(served_tower):
    tower, server = served_tower
    config = AgentConfig(
        agent_uuid="wire1",
        name="wire1",
        geometry=Geometry(4.0, 2.0),
        token=AGENT_TOKEN,
        broker_url=server.broker_ws_url,
        start_pose=Pose(1.0, 2.0, 0.0),
        clock_scale=20.0,
    )
    runtime = AgentRuntime.create(config)
    runtime.start()
    wait_until(lambda: "wire1" in tower.store.agents, message="checkin over wire")
    wait_until(
        lambda: tower.store.agents["wire1"].pose is not None, message="pose over wire"
    )
    assert tower.store.agents["wire1"].connection is Connection.ONLINE
    runtime.stop()
    wait_until(
        lambda: tower.store.agents["wire1"].connection is Connection.OFFLINE,
        message="offline marking",
    )


def test_port_conflict_detected(tmp_path):
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    tower = Tower(TowerConfig(port=port))
    try:
        with pytest.raises(PortInUse):
            TowerServer(tower).start()
    finally:
        blocker.close()
        tower.stop()
