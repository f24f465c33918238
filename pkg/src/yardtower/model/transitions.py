"""Mission and agent lifecycle state machines.

Both transition functions are total over (state, event): every pair either
maps to a defined next state or raises IllegalTransition. Terminal mission
states accept no events.
"""
from __future__ import annotations

from enum import Enum

from ..errors import YardError
from .types import AgentStatus, MissionStatus


class IllegalTransition(YardError):
    def __init__(self, state, event):
        self.state = state
        self.event = event
        super().__init__(f"illegal transition: {state.value} + {event.value}")


class MissionEvent(str, Enum):
    START = "start"
    AGENTS_READY = "agents_ready"
    ALL_STEPS_DONE = "all_steps_done"
    ALL_DISPATCHED = "all_dispatched"
    ALL_ASSIGNMENTS_DONE = "all_assignments_done"
    ERROR = "error"
    CANCEL = "cancel"


class AgentEvent(str, Enum):
    RESERVE = "reserve"
    AGENT_REPORTS_READY = "agent_reports_ready"
    ASSIGNMENT_STARTED = "assignment_started"
    ASSIGNMENT_DONE = "assignment_done"
    RELEASE = "release"
    DISCONNECT = "disconnect"


def transition_mission(
    current: MissionStatus,
    event: MissionEvent,
    *,
    requires_agents: bool = True,
    produced_assignments: bool = True,
) -> MissionStatus:
    """Next mission state for ``event``, or IllegalTransition.

    ``requires_agents`` selects the branch taken on START (recipes without
    agents skip reservation); ``produced_assignments`` selects the branch on
    ALL_STEPS_DONE (a plan that rendered no assignments is already done).
    """
    if current.terminal:
        raise IllegalTransition(current, event)
    if event is MissionEvent.ERROR:
        return MissionStatus.FAILED
    if event is MissionEvent.CANCEL:
        return MissionStatus.CANCELED

    if current is MissionStatus.CREATED and event is MissionEvent.START:
        return MissionStatus.RESERVING if requires_agents else MissionStatus.PLANNING
    if current is MissionStatus.RESERVING and event is MissionEvent.AGENTS_READY:
        return MissionStatus.PLANNING
    if current is MissionStatus.PLANNING and event is MissionEvent.ALL_STEPS_DONE:
        return MissionStatus.DISPATCHING if produced_assignments else MissionStatus.SUCCEEDED
    if current is MissionStatus.DISPATCHING and event is MissionEvent.ALL_DISPATCHED:
        return MissionStatus.EXECUTING
    if current is MissionStatus.EXECUTING and event is MissionEvent.ALL_ASSIGNMENTS_DONE:
        return MissionStatus.SUCCEEDED
    raise IllegalTransition(current, event)


# (state, event) -> next state. RESERVE is a legal no-op request on a free
# agent: the authoritative free->ready step happens only when the agent itself
# reports ready. DISCONNECT retains status (the connection flag is tracked on
# the record, not here).
_AGENT_TABLE: dict[tuple[AgentStatus, AgentEvent], AgentStatus] = {
    (AgentStatus.FREE, AgentEvent.RESERVE): AgentStatus.FREE,
    (AgentStatus.FREE, AgentEvent.AGENT_REPORTS_READY): AgentStatus.READY,
    (AgentStatus.READY, AgentEvent.ASSIGNMENT_STARTED): AgentStatus.BUSY,
    (AgentStatus.BUSY, AgentEvent.ASSIGNMENT_DONE): AgentStatus.READY,
    (AgentStatus.READY, AgentEvent.RELEASE): AgentStatus.FREE,
}


def transition_agent(current: AgentStatus, event: AgentEvent) -> AgentStatus:
    """Next agent status for ``event``, or IllegalTransition."""
    if event is AgentEvent.DISCONNECT:
        return current
    try:
        return _AGENT_TABLE[(current, event)]
    except KeyError:
        raise IllegalTransition(current, event) from None
