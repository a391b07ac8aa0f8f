"""Broker core: sessions, topics, subscriptions, per-node alias tables, routing.

One lock serializes every routing-table mutation and every publish, which is
what makes alias cutover atomic: a message is routed entirely under the old
table or entirely under the new one, never half-way. Delivery queues are
drained outside the lock by per-session writer/dispatcher threads.

Timestamps are integer nanoseconds since the broker started.
"""

from __future__ import annotations

import threading
import time
from collections import deque

from ..errors import (
    AliasCollision,
    NameInUse,
    NoSuchNode,
    NotAdmin,
    ReservedPrefix,
    SchemaConflict,
    StaleHandle,
)
from .topics import is_reserved, normalize_topic

DEFAULT_QUEUE_CAPACITY = 1024


class Payload:
    """Message payload that is lazily encoded.

    Holds raw bytes, a typed value, or both. Local typed publisher to local
    typed subscriber never touches the codec; the bytes materialize only when
    a raw subscriber or a TCP connection needs them.
    """

    __slots__ = ("_bytes", "_value", "_schema", "_registry")

    def __init__(self, data=None, value=None, schema=None, registry=None):
        self._bytes = data
        self._value = value
        self._schema = schema
        self._registry = registry

    @classmethod
    def from_bytes(cls, data: bytes) -> "Payload":
        return cls(data=data)

    @classmethod
    def from_value(cls, value, schema: str, registry) -> "Payload":
        return cls(value=value, schema=schema, registry=registry)

    @property
    def has_value(self) -> bool:
        return self._value is not None or self._schema is not None

    def to_bytes(self) -> bytes:
        if self._bytes is None:
            # benign race: encode is deterministic, double assignment is identical
            self._bytes = self._registry.encode(self._schema, self._value)
        return self._bytes

    def to_value(self, registry, schema_name):
        """Decoded value; caller is responsible for copying before mutation."""
        if self._value is not None or (self._bytes is None and self._schema is not None):
            return self._value
        if schema_name is None:
            return None
        return registry.decode(schema_name, self._bytes)

    def validate(self) -> None:
        """Raise ShapeMismatch now rather than at lazy encode time."""
        if self._bytes is None:
            self._registry.validate(self._schema, self._value)


class Delivery:
    """One enqueued message: what a subscriber receives."""

    __slots__ = ("topic", "schema", "seq", "ts_ns", "payload", "origin", "sub_id")

    def __init__(self, topic, schema, seq, ts_ns, payload, origin, sub_id):
        self.topic = topic
        self.schema = schema
        self.seq = seq
        self.ts_ns = ts_ns
        self.payload = payload
        self.origin = origin
        self.sub_id = sub_id


class _Endpoint:
    __slots__ = ("id", "session", "requested", "resolved", "schema", "seq", "queue", "drops", "capacity")

    def __init__(self, eid, session, requested, resolved, schema):
        self.id = eid
        self.session = session
        self.requested = requested
        self.resolved = resolved
        self.schema = schema
        self.seq = 0          # publications only
        self.queue = None     # subscriptions only
        self.drops = 0
        self.capacity = 0


class Session:
    def __init__(self, name, sink, admin, pid):
        self.name = name
        self.sink = sink
        self.admin = admin
        self.pid = pid
        self.aliases: dict[str, str] = {}
        self.pubs: dict[int, _Endpoint] = {}
        self.subs: dict[int, _Endpoint] = {}
        self.pubs_by_topic: dict[str, _Endpoint] = {}
        self.alive = True


class _Topic:
    __slots__ = ("name", "schema", "pubs", "subs")

    def __init__(self, name):
        self.name = name
        self.schema = None
        self.pubs: dict[int, _Endpoint] = {}
        self.subs: dict[int, _Endpoint] = {}


class Router:
    def __init__(self, *, queue_capacity=DEFAULT_QUEUE_CAPACITY):
        self._lock = threading.RLock()
        self._t0 = time.monotonic_ns()
        self._sessions: dict[str, Session] = {}
        self._topics: dict[str, _Topic] = {}
        self._next_id = 1
        self._queue_capacity = queue_capacity
        self._version = 0
        self._listeners = []

    # ------------------------------------------------------------------ time

    def now_ns(self) -> int:
        return time.monotonic_ns() - self._t0

    # -------------------------------------------------------------- sessions

    def attach(self, name, sink, *, admin=False, pid=None, aliases=()) -> Session:
        from ..serde import check_identifier

        check_identifier(name, "node name")
        with self._lock:
            if name in self._sessions:
                raise NameInUse(f"node name {name!r} already connected")
            session = Session(name, sink, admin, pid)
            for ext, internal in aliases:
                self._install_alias(session, normalize_topic(ext), normalize_topic(internal))
            self._sessions[name] = session
            self._bump()
        self._notify_graph()
        return session

    def detach(self, session: Session) -> None:
        with self._lock:
            if not session.alive:
                return
            session.alive = False
            for endpoint in list(session.pubs.values()):
                self._drop_endpoint(endpoint, publisher=True)
            for endpoint in list(session.subs.values()):
                self._drop_endpoint(endpoint, publisher=False)
            self._sessions.pop(session.name, None)
            self._bump()
        self._notify_graph()

    def session(self, name) -> Session | None:
        with self._lock:
            return self._sessions.get(name)

    # ------------------------------------------------------------- endpoints

    def advertise(self, session: Session, topic: str, schema: str) -> int:
        topic = normalize_topic(topic)
        if not schema:
            raise SchemaConflict("publications require a schema name")
        with self._lock:
            self._check_session(session)
            self._check_reserved(session, topic)
            existing = session.pubs_by_topic.get(topic)
            if existing is not None:
                if existing.schema != schema:
                    raise SchemaConflict(
                        f"{topic} already advertised by {session.name} as {existing.schema}"
                    )
                return existing.id
            resolved = session.aliases.get(topic, topic)
            record = self._topic_record(resolved)
            self._pin_schema(record, schema)
            endpoint = _Endpoint(self._take_id(), session, topic, resolved, schema)
            session.pubs[endpoint.id] = endpoint
            session.pubs_by_topic[topic] = endpoint
            record.pubs[endpoint.id] = endpoint
            self._bump()
        self._notify_graph()
        return endpoint.id

    def subscribe(self, session: Session, topic: str, schema: str | None) -> int:
        topic = normalize_topic(topic)
        with self._lock:
            self._check_session(session)
            self._check_reserved(session, topic)
            resolved = session.aliases.get(topic, topic)
            record = self._topic_record(resolved)
            if schema:
                self._pin_schema(record, schema)
            endpoint = _Endpoint(self._take_id(), session, topic, resolved, schema or None)
            endpoint.queue = deque()
            endpoint.capacity = self._queue_capacity
            session.subs[endpoint.id] = endpoint
            record.subs[endpoint.id] = endpoint
            self._bump()
        self._notify_graph()
        return endpoint.id

    def remove_endpoint(self, session: Session, handle_id: int) -> None:
        with self._lock:
            self._check_session(session)
            if handle_id in session.pubs:
                self._drop_endpoint(session.pubs[handle_id], publisher=True)
            elif handle_id in session.subs:
                self._drop_endpoint(session.subs[handle_id], publisher=False)
            else:
                raise StaleHandle(f"no endpoint {handle_id} on {session.name}")
            self._bump()
        self._notify_graph()

    # --------------------------------------------------------------- publish

    def publish(self, session: Session, handle_id: int, payload: Payload, origin=None) -> int:
        touched = []
        with self._lock:
            self._check_session(session)
            pub = session.pubs.get(handle_id)
            if pub is None:
                raise StaleHandle(f"no publication {handle_id} on {session.name}")
            record = self._topics[pub.resolved]
            if payload.has_value:
                payload.validate()  # synchronous ShapeMismatch
            pub.seq += 1
            ts = self.now_ns()
            for sub in record.subs.values():
                delivery = Delivery(sub.requested, record.schema, pub.seq, ts, payload, origin, sub.id)
                queue = sub.queue
                if len(queue) >= sub.capacity:
                    queue.popleft()
                    sub.drops += 1
                queue.append(delivery)
                touched.append(sub.session)
        for sess in touched:
            sess.sink.notify()
        return pub.seq

    # ---------------------------------------------------------------- aliases

    def set_alias(self, caller: Session, node: str, external: str, internal: str) -> None:
        external = normalize_topic(external)
        internal = normalize_topic(internal)
        with self._lock:
            if not caller.admin:
                raise NotAdmin("set_alias requires an admin session")
            target = self._sessions.get(node)
            if target is None:
                raise NoSuchNode(f"no node {node!r}")
            self._install_alias(target, external, internal)
            self._bump()
        self._notify_graph()

    def clear_alias(self, caller: Session, node: str, external: str) -> None:
        external = normalize_topic(external)
        with self._lock:
            if not caller.admin:
                raise NotAdmin("clear_alias requires an admin session")
            target = self._sessions.get(node)
            if target is None:
                raise NoSuchNode(f"no node {node!r}")
            if external in target.aliases:
                self._validate_migration(target, external, external)
                del target.aliases[external]
                self._migrate(target, external, external)
                self._bump()
        self._notify_graph()

    def _install_alias(self, target: Session, external: str, internal: str) -> None:
        if not is_reserved(internal):
            raise ReservedPrefix(f"alias target {internal!r} must live under /__wrap/")
        if is_reserved(external):
            raise ReservedPrefix(f"cannot alias reserved name {external!r}")
        for ext, existing in target.aliases.items():
            if existing == internal and ext != external:
                raise AliasCollision(f"{internal!r} already aliased from {ext!r} on {target.name}")
        self._validate_migration(target, external, internal)
        target.aliases[external] = internal
        self._migrate(target, external, internal)

    def _validate_migration(self, session: Session, requested: str, new_resolved: str) -> None:
        """Raise before any state changes if moved endpoints would conflict with a pin."""
        target = self._topics.get(new_resolved)
        if target is None or target.schema is None:
            return
        moving = [e for e in session.pubs.values() if e.requested == requested]
        moving += [e for e in session.subs.values() if e.requested == requested]
        for endpoint in moving:
            if endpoint.schema and endpoint.schema != target.schema:
                raise SchemaConflict(
                    f"alias target {new_resolved} pinned to {target.schema}, endpoint uses {endpoint.schema}"
                )

    def _migrate(self, session: Session, requested: str, new_resolved: str) -> None:
        """Move a node's existing bindings on `requested` to `new_resolved` (pre-validated)."""
        moving = [e for e in session.pubs.values() if e.requested == requested]
        moving += [e for e in session.subs.values() if e.requested == requested]
        for endpoint in moving:
            old = self._topics[endpoint.resolved]
            if endpoint.id in old.pubs:
                del old.pubs[endpoint.id]
            if endpoint.id in old.subs:
                del old.subs[endpoint.id]
            self._gc_topic(old)
            record = self._topic_record(new_resolved)
            if endpoint.schema:
                self._pin_schema(record, endpoint.schema)
            endpoint.resolved = new_resolved
            if endpoint.queue is None:
                record.pubs[endpoint.id] = endpoint
            else:
                record.subs[endpoint.id] = endpoint

    # --------------------------------------------------------------- snapshot

    def snapshot(self) -> dict:
        with self._lock:
            nodes = []
            for session in sorted(self._sessions.values(), key=lambda s: s.name):
                nodes.append({
                    "name": session.name,
                    "pid": session.pid,
                    "admin": session.admin,
                    "publications": sorted(
                        ({"topic": e.resolved, "schema": e.schema} for e in session.pubs.values()),
                        key=lambda d: d["topic"],
                    ),
                    "subscriptions": sorted(
                        ({"topic": e.resolved, "schema": e.schema or "raw", "drops": e.drops}
                         for e in session.subs.values()),
                        key=lambda d: d["topic"],
                    ),
                })
            topics = []
            for record in sorted(self._topics.values(), key=lambda t: t.name):
                topics.append({
                    "name": record.name,
                    "schema": record.schema,
                    "publishers": sorted({e.session.name for e in record.pubs.values()}),
                    "subscribers": sorted({e.session.name for e in record.subs.values()}),
                })
            aliases = []
            for session in self._sessions.values():
                for ext, internal in session.aliases.items():
                    aliases.append({"node": session.name, "external": ext, "internal": internal})
            aliases.sort(key=lambda a: (a["node"], a["external"]))
            return {"version": self._version, "nodes": nodes, "topics": topics, "aliases": aliases}

    # ------------------------------------------------------------- internals

    def add_graph_listener(self, callback) -> None:
        self._listeners.append(callback)

    def _notify_graph(self) -> None:
        for callback in self._listeners:
            callback()

    def _bump(self):
        self._version += 1

    def _take_id(self) -> int:
        eid = self._next_id
        self._next_id += 1
        return eid

    def _check_session(self, session: Session) -> None:
        if not session.alive:
            raise StaleHandle(f"session {session.name} is closed")

    @staticmethod
    def _check_reserved(session: Session, topic: str) -> None:
        if is_reserved(topic) and not session.admin:
            raise ReservedPrefix(f"{topic} is reserved for wrap internals")

    def _topic_record(self, name: str) -> _Topic:
        record = self._topics.get(name)
        if record is None:
            record = _Topic(name)
            self._topics[name] = record
        return record

    @staticmethod
    def _pin_schema(record: _Topic, schema: str) -> None:
        if record.schema is None:
            record.schema = schema
        elif record.schema != schema:
            raise SchemaConflict(f"topic {record.name} carries {record.schema}, not {schema}")

    def _drop_endpoint(self, endpoint: _Endpoint, *, publisher: bool) -> None:
        session = endpoint.session
        record = self._topics.get(endpoint.resolved)
        if publisher:
            session.pubs.pop(endpoint.id, None)
            session.pubs_by_topic.pop(endpoint.requested, None)
            if record:
                record.pubs.pop(endpoint.id, None)
        else:
            session.subs.pop(endpoint.id, None)
            if record:
                record.subs.pop(endpoint.id, None)
        if record:
            self._gc_topic(record)

    def _gc_topic(self, record: _Topic) -> None:
        if not record.pubs and not record.subs:
            self._topics.pop(record.name, None)
