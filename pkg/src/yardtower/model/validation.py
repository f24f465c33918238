"""Recipe validation against a service catalog view."""
from __future__ import annotations

from dataclasses import dataclass

from .types import ApplyResult, MissionRecipe, ServiceDomain, ServiceRegistration


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    step_id: str | None = None

    def to_doc(self) -> dict:
        return {"code": self.code, "message": self.message, "step_id": self.step_id}


def validate_recipe(
    recipe: MissionRecipe, registry_view: dict[str, ServiceRegistration]
) -> list[Violation]:
    """Every violation in ``recipe`` against the current catalog.

    An empty list means the recipe is executable by the orchestrator without
    a permission error. Violations are data, not failures.
    """
    violations: list[Violation] = []

    if not recipe.steps:
        violations.append(Violation("empty_recipe", "recipe has no steps"))
    if not recipe.name:
        violations.append(Violation("unnamed_recipe", "recipe name is empty"))

    seen: dict[str, int] = {}
    for step in recipe.steps:
        if step.step_id in seen:
            violations.append(
                Violation("duplicate_step_id", f"step_id {step.step_id!r} appears twice", step.step_id)
            )
        seen.setdefault(step.step_id, step.run_order)

        if step.run_order <= 0:
            violations.append(
                Violation("bad_run_order", f"run_order must be positive, got {step.run_order}", step.step_id)
            )

        reg = registry_view.get(step.service_name)
        if reg is None:
            violations.append(
                Violation("unknown_service", f"service {step.service_name!r} is not registered", step.step_id)
            )
            continue
        if not reg.enabled:
            violations.append(
                Violation("disabled_service", f"service {step.service_name!r} is disabled", step.step_id)
            )
        if reg.domain is ServiceDomain.AUTOMATON:
            violations.append(
                Violation(
                    "automaton_step",
                    "automaton services work directly with agents and cannot be orchestrated",
                    step.step_id,
                )
            )
        if step.apply_result is ApplyResult.MAP_WRITE and reg.domain is not ServiceDomain.MAP_SERVER:
            violations.append(
                Violation(
                    "permission_mismatch",
                    f"domain {reg.domain.value} lacks map-write permission",
                    step.step_id,
                )
            )
        if (
            step.apply_result is ApplyResult.ASSIGNMENT_SOURCE
            and reg.domain is not ServiceDomain.ASSIGNMENT_PLANNER
        ):
            violations.append(
                Violation(
                    "permission_mismatch",
                    f"domain {reg.domain.value} cannot produce assignments",
                    step.step_id,
                )
            )

    for step in recipe.steps:
        for dep in step.depends_on:
            dep_order = seen.get(dep)
            if dep_order is None:
                violations.append(
                    Violation("unknown_dependency", f"depends_on references unknown step {dep!r}", step.step_id)
                )
            elif dep_order >= step.run_order:
                violations.append(
                    Violation(
                        "dependency_order",
                        f"depends_on {dep!r} must have a strictly smaller run_order",
                        step.step_id,
                    )
                )
    return violations
