from .engine import (
    AgentNotReady,
    EmptyAssignmentList,
    Orchestrator,
    OrchestratorConfig,
    PermissionViolation,
    RecipeDegraded,
    RecipeRequiresAgents,
    UnknownAgentInResult,
    UnknownRecipe,
    assignment_id_for,
    build_request_document,
    enforce_response_effects,
    response_effects,
)
from .jobs import (
    JobFailed,
    JobTimeout,
    PollPolicy,
    ServiceClient,
    ServiceJob,
    ServiceRejected,
    ServiceUnreachable,
)

__all__ = [
    "AgentNotReady",
    "EmptyAssignmentList",
    "JobFailed",
    "JobTimeout",
    "Orchestrator",
    "OrchestratorConfig",
    "PermissionViolation",
    "PollPolicy",
    "RecipeDegraded",
    "RecipeRequiresAgents",
    "ServiceClient",
    "ServiceJob",
    "ServiceRejected",
    "ServiceUnreachable",
    "UnknownAgentInResult",
    "UnknownRecipe",
    "assignment_id_for",
    "build_request_document",
    "enforce_response_effects",
    "response_effects",
]
