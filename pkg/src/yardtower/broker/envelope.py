"""Broker message envelope and its wire frame codec.

A frame is the UTF-8 JSON text of the envelope document, carried as one
WebSocket text message. The envelope schema is strict: unknown top-level
fields are rejected so protocol evolution stays explicit. Bodies are opaque.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..clock import now_ms
from ..errors import YardError
from ..model import new_id
from .topics import InvalidRoutingKey, validate_routing_key


class MalformedFrame(YardError):
    pass


_FIELDS = ("msg_id", "routing_key", "msg_type", "ts", "body")


@dataclass(frozen=True)
class Envelope:
    routing_key: str
    msg_type: str
    body: dict
    msg_id: str = field(default_factory=new_id)
    ts: int = field(default_factory=now_ms)

    def __post_init__(self):
        validate_routing_key(self.routing_key)

    def to_doc(self) -> dict:
        return {
            "msg_id": self.msg_id,
            "routing_key": self.routing_key,
            "msg_type": self.msg_type,
            "ts": self.ts,
            "body": self.body,
        }


def encode_frame(envelope: Envelope) -> bytes:
    return json.dumps(envelope.to_doc(), separators=(",", ":")).encode("utf-8")


def decode_frame(data: bytes | str) -> Envelope:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrame(f"frame is not UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedFrame(f"frame is not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedFrame("frame is not a JSON object")
    missing = [f for f in _FIELDS if f not in doc]
    if missing:
        raise MalformedFrame(f"frame missing required fields: {missing}")
    extra = [k for k in doc if k not in _FIELDS]
    if extra:
        raise MalformedFrame(f"frame has unknown top-level fields: {extra}")
    if not isinstance(doc["msg_id"], str) or not doc["msg_id"]:
        raise MalformedFrame("msg_id must be a non-empty string")
    if not isinstance(doc["msg_type"], str) or not doc["msg_type"]:
        raise MalformedFrame("msg_type must be a non-empty string")
    if not isinstance(doc["ts"], int) or isinstance(doc["ts"], bool):
        raise MalformedFrame("ts must be an integer (epoch ms)")
    if not isinstance(doc["body"], dict):
        raise MalformedFrame("body must be an object")
    if not isinstance(doc["routing_key"], str):
        raise MalformedFrame("routing_key must be a string")
    try:
        return Envelope(
            msg_id=doc["msg_id"],
            routing_key=doc["routing_key"],
            msg_type=doc["msg_type"],
            ts=doc["ts"],
            body=doc["body"],
        )
    except InvalidRoutingKey as exc:
        raise MalformedFrame(str(exc)) from None
