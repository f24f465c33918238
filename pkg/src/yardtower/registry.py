"""Catalog of microservice registrations and mission recipes.

Each service is registered under one of four domains; the permission matrix
is constant at runtime and drives every data-flow decision: only map servers
may write map data, only assignment planners may target agents, storage
servers passively receive data, and automaton services work directly with
agents and are never called by the orchestrator.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass
from urllib.parse import urlparse

from .errors import YardError
from .model import MissionRecipe, ServiceDomain, ServiceRegistration, Violation, validate_recipe
from .store import StateStore


class DuplicateName(YardError):
    pass


class InvalidUrl(YardError):
    pass


class UnknownService(YardError):
    pass


class ValidationFailed(YardError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(v.message for v in violations))


@dataclass(frozen=True)
class DomainPermissions:
    may_target_agents: bool
    may_write_map: bool
    receives_yard_state: bool
    callable_by_orchestrator: bool


PERMISSION_MATRIX: dict[ServiceDomain, DomainPermissions] = {
    ServiceDomain.ASSIGNMENT_PLANNER: DomainPermissions(True, False, True, True),
    ServiceDomain.MAP_SERVER: DomainPermissions(False, True, True, True),
    ServiceDomain.STORAGE_SERVER: DomainPermissions(False, False, True, True),
    ServiceDomain.AUTOMATON: DomainPermissions(False, False, False, False),
}


def check_effect(domain: ServiceDomain, effect: str) -> bool:
    """Allow/deny lookup for a data-flow effect (``write_map`` or
    ``target_agent``)."""
    perms = PERMISSION_MATRIX[domain]
    if effect == "write_map":
        return perms.may_write_map
    if effect == "target_agent":
        return perms.may_target_agents
    raise ValueError(f"unknown effect {effect!r}")


class ServiceRegistry:
    """Admin surface over the catalog held in the state store."""

    def __init__(self, store: StateStore):
        self._store = store

    # -- services ------------------------------------------------------

    def register_service(
        self,
        service_name: str,
        domain: ServiceDomain,
        base_url: str,
        *,
        result_timeout_ms: int = 90_000,
        poll_interval_ms: int = 1_000,
        subdomain: str | None = None,
    ) -> ServiceRegistration:
        """Register a microservice. The api_key is generated here and
        returned once; catalog listings redact it afterwards."""
        parsed = urlparse(base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise InvalidUrl(base_url)
        if service_name in self._store.services:
            raise DuplicateName(service_name)
        registration = ServiceRegistration(
            service_name=service_name,
            domain=domain,
            base_url=base_url.rstrip("/"),
            api_key=secrets.token_hex(32),
            enabled=True,
            result_timeout_ms=result_timeout_ms,
            poll_interval_ms=poll_interval_ms,
            subdomain=subdomain,
        )
        self._store.put_service(registration)
        return registration

    def set_enabled(self, service_name: str, enabled: bool) -> None:
        if service_name not in self._store.services:
            raise UnknownService(service_name)
        self._store.set_service_enabled(service_name, enabled)

    def remove_service(self, service_name: str) -> None:
        if service_name not in self._store.services:
            raise UnknownService(service_name)
        self._store.remove_service(service_name)

    def get_service(self, service_name: str) -> ServiceRegistration:
        reg = self._store.services.get(service_name)
        if reg is None:
            raise UnknownService(service_name)
        return reg

    def list_services(self) -> list[ServiceRegistration]:
        return sorted(self._store.services.values(), key=lambda s: s.service_name)

    def catalog_view(self) -> dict[str, ServiceRegistration]:
        return dict(self._store.services)

    # -- recipes -------------------------------------------------------

    def upsert_recipe(self, recipe: MissionRecipe) -> str:
        violations = validate_recipe(recipe, self.catalog_view())
        if violations:
            raise ValidationFailed(violations)
        self._store.put_recipe(recipe)
        return recipe.name

    def get_recipe(self, name: str) -> MissionRecipe | None:
        return self._store.recipes.get(name)

    def remove_recipe(self, name: str) -> None:
        self._store.remove_recipe(name)

    def is_degraded(self, recipe: MissionRecipe) -> list[Violation]:
        """Recomputed on demand so disabling a service immediately degrades
        every recipe that references it."""
        return validate_recipe(recipe, self.catalog_view())

    def list_recipes(self) -> list[dict]:
        out = []
        for recipe in sorted(self._store.recipes.values(), key=lambda r: r.name):
            violations = self.is_degraded(recipe)
            doc = recipe.to_doc()
            doc["degraded"] = bool(violations)
            doc["violations"] = [v.to_doc() for v in violations]
            out.append(doc)
        return out
