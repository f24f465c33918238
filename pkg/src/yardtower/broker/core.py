"""In-process topic-routed publish/subscribe bus.

One Broker instance is the message fabric of a tower process. Publishing is
safe from any thread; a single lock serializes fan-out so per-routing-key
delivery order equals publish order for every subscriber. There is no
persistence or replay: envelopes published before a subscription exists are
never delivered to it.
"""
from __future__ import annotations

import queue
import threading
import time

from ..errors import YardError
from .envelope import Envelope
from .topics import topic_matches, validate_pattern, validate_routing_key


class SubscriptionClosed(YardError):
    pass


class DuplicateMessageId(YardError):
    pass


_CLOSED = object()


class Subscription:
    """Ordered stream of envelopes matching one topic pattern.

    Consumed by a single consumer at a time. With ``max_backlog`` set, the
    subscription is closed (``overflowed`` flag raised) instead of buffering
    past the limit; slow consumers are the subscriber's problem, not the
    broker's.
    """

    def __init__(self, broker: "Broker", pattern: str, max_backlog: int | None = None):
        self.pattern = pattern
        self._broker = broker
        self._queue: queue.Queue = queue.Queue(maxsize=max_backlog or 0)
        self._closed = threading.Event()
        self.overflowed = False

    def get(self, timeout: float | None = None) -> Envelope:
        """Next envelope; raises queue.Empty on timeout, SubscriptionClosed
        once closed and drained.

        Waits in short slices so a close() always wakes blocked consumers,
        even when the sentinel could not be enqueued (full queue).
        """
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            if self._closed.is_set():
                try:
                    item = self._queue.get_nowait()
                except queue.Empty:
                    raise SubscriptionClosed(self.pattern) from None
            else:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    raise queue.Empty
                wait = 0.05 if remaining is None else min(0.05, remaining)
                try:
                    item = self._queue.get(timeout=wait)
                except queue.Empty:
                    continue
            if item is _CLOSED:
                raise SubscriptionClosed(self.pattern)
            return item

    def drain(self) -> list[Envelope]:
        """Everything currently buffered, without blocking."""
        out = []
        while True:
            try:
                item = self._queue.get_nowait()
            except queue.Empty:
                return out
            if item is _CLOSED:
                return out
            out.append(item)

    @property
    def closed(self) -> bool:
        return self._closed.is_set()

    def close(self) -> None:
        if not self._closed.is_set():
            self._closed.set()
            self._broker._remove(self)
            try:
                self._queue.put_nowait(_CLOSED)
            except queue.Full:
                pass  # consumers notice the closed flag once drained

    def _offer(self, envelope: Envelope) -> None:
        try:
            self._queue.put_nowait(envelope)
        except queue.Full:
            self.overflowed = True
            self.close()


class Broker:
    def __init__(self):
        # Reentrant: an overflow during fan-out closes the subscription,
        # which removes it under the same lock.
        self._lock = threading.RLock()
        self._subs: list[Subscription] = []
        self._seen_ids: set[str] = set()

    def publish(self, envelope: Envelope) -> int:
        """Deliver to every live matching subscription; returns the number of
        subscriptions matched.

        Fan-out happens under the broker lock so per-(routing_key,
        subscription) delivery order always equals publish order.
        """
        validate_routing_key(envelope.routing_key)
        with self._lock:
            if envelope.msg_id in self._seen_ids:
                raise DuplicateMessageId(envelope.msg_id)
            self._seen_ids.add(envelope.msg_id)
            matched = [s for s in self._subs if topic_matches(s.pattern, envelope.routing_key)]
            for sub in matched:
                sub._offer(envelope)
        return len(matched)

    def subscribe(self, pattern: str, max_backlog: int | None = None) -> Subscription:
        validate_pattern(pattern)
        sub = Subscription(self, pattern, max_backlog)
        with self._lock:
            self._subs.append(sub)
        return sub

    def _remove(self, sub: Subscription) -> None:
        with self._lock:
            try:
                self._subs.remove(sub)
            except ValueError:
                pass

    def close(self) -> None:
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            sub.close()
