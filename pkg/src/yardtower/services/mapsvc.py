"""Reference map server: validates declarative map edits into a delta.

The mission request carries ``{"set": [map objects], "remove": [ids]}``; the
service checks the geometry and echoes a ``{"update", "delete"}`` delta for
the orchestrator to apply (the service itself holds no map state — the yard
state in the tower is authoritative).
"""
from __future__ import annotations

from ..model import MapObject
from .kit import HandlerFailure


def map_handler(doc: dict) -> dict:
    request = doc.get("request", {})
    update = []
    for obj_doc in request.get("set", []):
        try:
            obj = MapObject.from_doc(obj_doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise HandlerFailure(f"bad map object: {exc}") from None
        if len(obj.geometry) < 3:
            raise HandlerFailure(
                f"object {obj.object_id!r}: polygon needs >= 3 vertices, got {len(obj.geometry)}"
            )
        update.append(obj.to_doc())
    delete = [str(object_id) for object_id in request.get("remove", [])]
    return {"update": update, "delete": delete}
