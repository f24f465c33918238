from . import keys
from .core import Broker, DuplicateMessageId, Subscription, SubscriptionClosed
from .envelope import Envelope, MalformedFrame, decode_frame, encode_frame
from .topics import InvalidPattern, InvalidRoutingKey, topic_matches, validate_pattern, validate_routing_key

__all__ = [
    "Broker",
    "DuplicateMessageId",
    "Envelope",
    "InvalidPattern",
    "InvalidRoutingKey",
    "MalformedFrame",
    "Subscription",
    "SubscriptionClosed",
    "decode_frame",
    "encode_frame",
    "keys",
    "topic_matches",
    "validate_pattern",
    "validate_routing_key",
]
