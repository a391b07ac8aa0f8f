from .client import BrokerClient, Incoming, PublicationHandle, SubscriptionHandle, broker_uri
from .router import Delivery, Payload, Router
from .server import DEFAULT_PORT, BrokerServer
from .snapshot import normalize_snapshot, snapshot_from_json, snapshot_to_json, validate_snapshot
from .topics import WRAP_PREFIX, is_reserved, normalize_topic, wrap_internal_name

__all__ = [
    "BrokerClient",
    "BrokerServer",
    "DEFAULT_PORT",
    "Delivery",
    "Incoming",
    "Payload",
    "PublicationHandle",
    "Router",
    "SubscriptionHandle",
    "WRAP_PREFIX",
    "broker_uri",
    "is_reserved",
    "normalize_snapshot",
    "normalize_topic",
    "snapshot_from_json",
    "snapshot_to_json",
    "validate_snapshot",
    "wrap_internal_name",
]
