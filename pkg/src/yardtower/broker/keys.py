"""Canonical routing keys.

Tower to agent: ``agent.<uuid>.assignment``, ``agent.<uuid>.instant_action``.
Agent to tower: ``agent.<uuid>.checkin``, ``agent.<uuid>.state``,
``agent.<uuid>.sensors``. Internal domain events are mirrored on
``event.<kind>`` for the gateway broadcast.
"""
from __future__ import annotations

from ..model import EventKind


def assignment(agent_uuid: str) -> str:
    return f"agent.{agent_uuid}.assignment"


def instant_action(agent_uuid: str) -> str:
    return f"agent.{agent_uuid}.instant_action"


def checkin(agent_uuid: str) -> str:
    return f"agent.{agent_uuid}.checkin"


def state(agent_uuid: str) -> str:
    return f"agent.{agent_uuid}.state"


def sensors(agent_uuid: str) -> str:
    return f"agent.{agent_uuid}.sensors"


def event(kind: EventKind) -> str:
    return f"event.{kind.value}"


ALL_AGENT_TRAFFIC = "agent.#"
ALL_EVENTS = "event.#"
