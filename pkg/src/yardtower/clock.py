"""Time sources.

Everything that sleeps or reads the time goes through a Clock so tests can
substitute a fake and simulated agents can run faster than real time.
All timestamps in the system are integer milliseconds since the Unix epoch.
"""
from __future__ import annotations

import threading
import time


def now_ms() -> int:
    return int(time.time() * 1000)


class Clock:
    """Wall clock. ``scale`` > 1 accelerates simulated time.

    ``now_ms`` always returns real epoch time (timestamps stay comparable
    across components); scaling applies to sleeps and to elapsed simulated
    durations measured through ``elapsed_sim_ms``.
    """

    def __init__(self, scale: float = 1.0):
        if scale <= 0:
            raise ValueError("clock scale must be > 0")
        self.scale = scale

    def now_ms(self) -> int:
        return now_ms()

    def monotonic_ms(self) -> float:
        return time.monotonic() * 1000.0

    def sleep_ms(self, duration_ms: float) -> None:
        if duration_ms > 0:
            time.sleep(duration_ms / 1000.0 / self.scale)

    def elapsed_sim_ms(self, start_monotonic_ms: float) -> float:
        """Simulated milliseconds elapsed since a ``monotonic_ms`` reading."""
        return (self.monotonic_ms() - start_monotonic_ms) * self.scale


class FakeClock(Clock):
    """Deterministic clock for tests: ``sleep_ms`` advances time instantly."""

    def __init__(self, start_ms: int = 0):
        super().__init__(scale=1.0)
        self._now = float(start_ms)
        self._lock = threading.Lock()

    def now_ms(self) -> int:
        with self._lock:
            return int(self._now)

    def monotonic_ms(self) -> float:
        with self._lock:
            return self._now

    def sleep_ms(self, duration_ms: float) -> None:
        with self._lock:
            self._now += max(0.0, duration_ms)

    def elapsed_sim_ms(self, start_monotonic_ms: float) -> float:
        return self.monotonic_ms() - start_monotonic_ms
