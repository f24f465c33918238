"""Dot-separated topic patterns with AMQP topic-exchange semantics.

``*`` matches exactly one segment; ``#`` matches zero or more segments and
may appear trailing or interior. Key segments are ``[a-z0-9_-]+``.
"""
from __future__ import annotations

import re

from ..errors import YardError

_SEGMENT = re.compile(r"^[a-z0-9_-]+$")


class InvalidRoutingKey(YardError):
    pass


class InvalidPattern(YardError):
    pass


def validate_routing_key(key: str) -> None:
    if not key or not all(_SEGMENT.match(seg) for seg in key.split(".")):
        raise InvalidRoutingKey(f"bad routing key: {key!r}")


def validate_pattern(pattern: str) -> None:
    if not pattern:
        raise InvalidPattern("empty pattern")
    for seg in pattern.split("."):
        if seg not in ("*", "#") and not _SEGMENT.match(seg):
            raise InvalidPattern(f"bad pattern segment {seg!r} in {pattern!r}")


def topic_matches(pattern: str, key: str) -> bool:
    """True iff ``key`` is routed to a binding on ``pattern``."""
    pat = pattern.split(".")
    segs = key.split(".")
    # dp[j] == True means pat[j:] can match the remaining key segments.
    n, m = len(segs), len(pat)
    dp = [[False] * (m + 1) for _ in range(n + 1)]
    dp[n][m] = True
    for j in range(m - 1, -1, -1):
        # '#' may match the empty tail.
        dp[n][j] = pat[j] == "#" and dp[n][j + 1]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if pat[j] == "#":
                dp[i][j] = dp[i][j + 1] or dp[i + 1][j]
            elif pat[j] == "*" or pat[j] == segs[i]:
                dp[i][j] = dp[i + 1][j + 1]
    return dp[0][0]
