"""Broker connections for agent processes.

``InProcessLink`` wraps a Broker instance directly (same-process agents,
tests). ``WsLink`` speaks the wire bridge: one JSON envelope per WebSocket
text message, an auth frame first, then subscribe frames and ordinary
publishes. The link owns reconnection: on a drop it retries with exponential
backoff (1, 2, 4, ... capped), re-authenticates, re-subscribes every pattern
and then fires ``on_connect`` so the owner can re-announce its state.
Publishes issued while disconnected are buffered and flushed on reconnect.
"""
from __future__ import annotations

import logging
import queue
import threading
from collections import deque

from ..errors import YardError
from ..model import new_id
from .core import Broker, Subscription
from .envelope import Envelope, MalformedFrame, decode_frame, encode_frame
from .topics import topic_matches

log = logging.getLogger(__name__)


class AuthFailed(YardError):
    pass


class LinkClosed(YardError):
    pass


def auth_frame(agent_uuid: str, token: str) -> Envelope:
    return Envelope(
        routing_key="control.auth",
        msg_type="auth",
        body={"agent_uuid": agent_uuid, "token": token},
    )


def subscribe_frame(pattern: str) -> Envelope:
    return Envelope(routing_key="control.subscribe", msg_type="subscribe", body={"pattern": pattern})


class InProcessLink:
    """Direct connection to a Broker object in the same process."""

    def __init__(self, broker: Broker):
        self._broker = broker
        self.on_connect = None

    def connect(self) -> None:
        if self.on_connect:
            self.on_connect()

    def publish(self, envelope: Envelope) -> None:
        self._broker.publish(envelope)

    def subscribe(self, pattern: str) -> Subscription:
        return self._broker.subscribe(pattern)

    def close(self) -> None:
        pass


class _LinkSubscription:
    """Client-side subscription: the server forwards matching envelopes and
    the link routes them into this local queue."""

    def __init__(self, pattern: str):
        self.pattern = pattern
        self._queue: queue.Queue = queue.Queue()
        self.closed = False

    def get(self, timeout: float | None = None) -> Envelope:
        item = self._queue.get(timeout=timeout) if timeout is not None else self._queue.get()
        if item is None:
            raise LinkClosed(self.pattern)
        return item

    def close(self) -> None:
        self.closed = True
        self._queue.put(None)

    def _offer(self, envelope: Envelope) -> None:
        if not self.closed:
            self._queue.put(envelope)


class WsLink:
    def __init__(
        self,
        url: str,
        agent_uuid: str,
        token: str,
        *,
        backoff_initial_s: float = 1.0,
        backoff_max_s: float = 30.0,
        max_retries: int | None = None,
    ):
        self.url = url
        self.agent_uuid = agent_uuid
        self.token = token
        self.backoff_initial_s = backoff_initial_s
        self.backoff_max_s = backoff_max_s
        self.max_retries = max_retries
        self.on_connect = None

        self._ws = None
        self._send_lock = threading.Lock()
        self._subs: list[_LinkSubscription] = []
        self._subs_lock = threading.Lock()
        self._outbox: deque[Envelope] = deque()
        self._closed = threading.Event()
        self._connected = threading.Event()
        self._reader: threading.Thread | None = None

    def connect(self) -> None:
        """Blocks until the first successful connection (or AuthFailed)."""
        self._connect_once()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _connect_once(self) -> None:
        from websockets.sync.client import connect as ws_connect

        retries = 0
        backoff = self.backoff_initial_s
        while not self._closed.is_set():
            try:
                ws = ws_connect(self.url, open_timeout=5, close_timeout=2)
                ws.send(encode_frame(auth_frame(self.agent_uuid, self.token)).decode())
                ack = decode_frame(ws.recv(timeout=5))
                if ack.msg_type != "auth_ok":
                    raise AuthFailed(f"unexpected handshake reply {ack.msg_type!r}")
                with self._subs_lock:
                    patterns = [s.pattern for s in self._subs if not s.closed]
                for pattern in patterns:
                    ws.send(encode_frame(subscribe_frame(pattern)).decode())
                self._ws = ws
                self._connected.set()
                if self.on_connect:
                    self.on_connect()
                self._flush_outbox()
                return
            except AuthFailed:
                self._closed.set()
                raise
            except Exception as exc:
                rcvd = getattr(exc, "rcvd", None)
                if rcvd is not None and getattr(rcvd, "code", 0) == 4001:
                    self._closed.set()
                    raise AuthFailed("broker rejected credentials") from None
                retries += 1
                if self.max_retries is not None and retries > self.max_retries:
                    raise YardError(f"broker unreachable after {retries - 1} retries: {exc}") from None
                log.info("broker unreachable (%s); retrying in %.1fs", exc, backoff)
                if self._closed.wait(timeout=backoff):
                    return
                backoff = min(backoff * 2, self.backoff_max_s)

    def _read_loop(self) -> None:
        while not self._closed.is_set():
            ws = self._ws
            if ws is None:
                return
            try:
                frame = ws.recv()
            except Exception:
                self._connected.clear()
                self._ws = None
                if self._closed.is_set():
                    return
                try:
                    self._connect_once()
                except YardError:
                    return
                continue
            try:
                envelope = decode_frame(frame)
            except MalformedFrame:
                log.warning("dropping malformed frame from bridge")
                continue
            with self._subs_lock:
                targets = [s for s in self._subs if topic_matches(s.pattern, envelope.routing_key)]
            for sub in targets:
                sub._offer(envelope)

    def _flush_outbox(self) -> None:
        while self._outbox:
            envelope = self._outbox.popleft()
            try:
                self._ws.send(encode_frame(envelope).decode())
            except Exception:
                self._outbox.appendleft(envelope)
                return

    def publish(self, envelope: Envelope) -> None:
        with self._send_lock:
            ws = self._ws
            if ws is None:
                self._outbox.append(envelope)
                return
            try:
                ws.send(encode_frame(envelope).decode())
            except Exception:
                self._outbox.append(envelope)

    def subscribe(self, pattern: str) -> _LinkSubscription:
        sub = _LinkSubscription(pattern)
        with self._subs_lock:
            self._subs.append(sub)
        if self._ws is not None:
            try:
                with self._send_lock:
                    self._ws.send(encode_frame(subscribe_frame(pattern)).decode())
            except Exception:
                pass  # re-subscribed on reconnect
        return sub

    def close(self) -> None:
        self._closed.set()
        ws = self._ws
        self._ws = None
        if ws is not None:
            try:
                ws.close()
            except Exception:
                pass
        with self._subs_lock:
            for sub in self._subs:
                sub.close()
        if self._reader is not None and self._reader is not threading.current_thread():
            self._reader.join(timeout=5)
