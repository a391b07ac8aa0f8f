"""Broker client: one session, either in-process (direct router calls) or TCP.

Handlers run on a single dispatch thread per client, so invocations for any
one subscription are serialized in arrival order. The client allows at most
one subscription per topic (a node never declares duplicates), which lets
TCP deliveries route by topic name alone.

Broker resolution order for TCP: explicit uri > NW_BROKER_URI > localhost
default port.
"""

from __future__ import annotations

import copy
import logging
import os
import socket
import threading
from collections import deque

from ..errors import (
    BrokerUnreachable,
    ProtocolError,
    SchemaConflict,
    error_for_code,
)
from ..serde import builtin_registry
from . import wire
from .router import Payload, Router
from .server import DEFAULT_PORT
from .snapshot import snapshot_from_json
from .topics import normalize_topic

log = logging.getLogger(__name__)

ENV_BROKER_URI = "NW_BROKER_URI"
ENV_NODE_NAME = "NW_NODE_NAME"


def broker_uri(explicit=None) -> str:
    uri = explicit or os.environ.get(ENV_BROKER_URI) or f"127.0.0.1:{DEFAULT_PORT}"
    return uri


def split_uri(uri: str) -> tuple:
    host, _, port = uri.rpartition(":")
    return host or "127.0.0.1", int(port)


class Incoming:
    """A delivered message as seen by a handler."""

    __slots__ = ("topic", "schema", "seq", "ts_ns", "origin", "_payload", "_registry")

    def __init__(self, topic, schema, seq, ts_ns, origin, payload, registry):
        self.topic = topic
        self.schema = schema
        self.seq = seq
        self.ts_ns = ts_ns
        self.origin = origin
        self._payload = payload
        self._registry = registry

    def bytes(self) -> bytes:
        return self._payload.to_bytes()

    def value(self):
        """Decoded message (fresh copy, safe to mutate); None when schema unknown."""
        if self._payload.has_value:
            return copy.deepcopy(self._payload.to_value(self._registry, self.schema))
        if self.schema is None or self.schema not in self._registry:
            return None
        return self._registry.decode(self.schema, self._payload.to_bytes())

    def can_decode(self) -> bool:
        return self._payload.has_value or (self.schema is not None and self.schema in self._registry)


class PublicationHandle:
    __slots__ = ("id", "topic", "schema", "_seq_lock", "_seq")

    def __init__(self, handle_id, topic, schema):
        self.id = handle_id
        self.topic = topic
        self.schema = schema
        self._seq_lock = threading.Lock()
        self._seq = 0


class SubscriptionHandle:
    __slots__ = ("id", "topic", "schema")

    def __init__(self, handle_id, topic, schema):
        self.id = handle_id
        self.topic = topic
        self.schema = schema


class BrokerClient:
    """Shared surface over the two transports; construct via connect() or local()."""

    def __init__(self, name, registry):
        self.name = name
        self.registry = registry or builtin_registry()
        self._handlers = {}           # topic -> callable(Incoming)
        self._handler_lock = threading.Lock()
        self._closed = threading.Event()
        self.on_async_error = None    # callable(code, message)

    # -- constructors -----------------------------------------------------

    @staticmethod
    def connect(name, uri=None, *, admin=False, aliases=(), pid=None, registry=None,
                timeout=10.0) -> "BrokerClient":
        return _TcpClient(name, broker_uri(uri), admin=admin, aliases=aliases,
                          pid=pid if pid is not None else os.getpid(),
                          registry=registry, timeout=timeout)

    @staticmethod
    def local(name, router: Router, *, admin=False, aliases=(), pid=None,
              registry=None) -> "BrokerClient":
        return _LocalClient(name, router, admin=admin, aliases=aliases,
                            pid=pid if pid is not None else os.getpid(), registry=registry)

    # -- surface ----------------------------------------------------------

    def advertise(self, topic, schema) -> PublicationHandle:
        topic = normalize_topic(topic)
        handle_id = self._advertise(topic, schema)
        return PublicationHandle(handle_id, topic, schema)

    def subscribe(self, topic, schema, handler) -> SubscriptionHandle:
        """schema=None subscribes raw (anyMsg mode): handler sees undecoded payloads."""
        topic = normalize_topic(topic)
        with self._handler_lock:
            if topic in self._handlers:
                raise SchemaConflict(f"{self.name} already subscribes to {topic}")
            self._handlers[topic] = handler
        try:
            handle_id = self._subscribe(topic, schema)
        except Exception:
            with self._handler_lock:
                self._handlers.pop(topic, None)
            raise
        return SubscriptionHandle(handle_id, topic, schema)

    def unsubscribe(self, handle) -> None:
        self._remove(handle.id)
        if isinstance(handle, SubscriptionHandle):
            with self._handler_lock:
                self._handlers.pop(handle.topic, None)

    def publish(self, handle: PublicationHandle, value=None, *, data=None, origin=None) -> int:
        """Typed publish with `value`, raw passthrough with `data` bytes."""
        if data is None:
            payload_bytes = None
        else:
            payload_bytes = data
        return self._publish(handle, value, payload_bytes, origin)

    def set_alias(self, node, external, internal) -> None:
        self._set_alias(node, normalize_topic(external), normalize_topic(internal))

    def clear_alias(self, node, external) -> None:
        self._clear_alias(node, normalize_topic(external))

    def snapshot(self) -> dict:
        return self._snapshot()

    def close(self) -> None:
        raise NotImplementedError

    # -- dispatch ----------------------------------------------------------

    def _dispatch(self, incoming: Incoming) -> None:
        with self._handler_lock:
            handler = self._handlers.get(incoming.topic)
        if handler is None:
            return
        try:
            handler(incoming)
        except Exception:
            log.exception("handler for %s failed on %s", incoming.topic, self.name)


class _LocalClient(BrokerClient):
    """Direct router access; typed deliveries skip encode/decode entirely."""

    def __init__(self, name, router, *, admin, aliases, pid, registry):
        super().__init__(name, registry)
        self.router = router
        self._wake = threading.Event()
        self.session = router.attach(name, self, admin=admin, pid=pid,
                                     aliases=[(normalize_topic(e), normalize_topic(i)) for e, i in aliases])
        self._thread = threading.Thread(target=self._dispatch_loop, name=f"client-{name}", daemon=True)
        self._thread.start()

    # sink interface
    def notify(self):
        self._wake.set()

    def _dispatch_loop(self):
        while not self._closed.is_set():
            drained = False
            for sub in list(self.session.subs.values()):
                queue = sub.queue
                while queue:
                    d = queue.popleft()
                    drained = True
                    self._dispatch(Incoming(d.topic, d.schema, d.seq, d.ts_ns, d.origin,
                                            d.payload, self.registry))
            if not drained:
                self._wake.wait(timeout=0.2)
                self._wake.clear()

    def _advertise(self, topic, schema):
        return self.router.advertise(self.session, topic, schema)

    def _subscribe(self, topic, schema):
        return self.router.subscribe(self.session, topic, schema)

    def _remove(self, handle_id):
        self.router.remove_endpoint(self.session, handle_id)

    def _publish(self, handle, value, data, origin):
        if data is not None:
            payload = Payload.from_bytes(data)
        else:
            payload = Payload.from_value(value, handle.schema, self.registry)
        return self.router.publish(self.session, handle.id, payload, origin)

    def _set_alias(self, node, external, internal):
        self.router.set_alias(self.session, node, external, internal)

    def _clear_alias(self, node, external):
        self.router.clear_alias(self.session, node, external)

    def _snapshot(self):
        return self.router.snapshot()

    def close(self):
        if self._closed.is_set():
            return
        self._closed.set()
        self._wake.set()
        self.router.detach(self.session)
        self._thread.join(timeout=2.0)


class _TcpClient(BrokerClient):
    def __init__(self, name, uri, *, admin, aliases, pid, registry, timeout):
        super().__init__(name, registry)
        self.uri = uri
        self._timeout = timeout
        host, port = split_uri(uri)
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise BrokerUnreachable(f"cannot reach broker at {uri}: {exc}") from None
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._write_lock = threading.Lock()
        self._request_lock = threading.Lock()
        self._reply = None
        self._reply_ready = threading.Condition()
        self._deliveries = deque()
        self._delivery_wake = threading.Event()
        self._pubs = {}
        self._reader = threading.Thread(target=self._read_loop, name=f"client-rx-{name}", daemon=True)
        self._dispatcher = threading.Thread(target=self._dispatch_loop, name=f"client-{name}", daemon=True)
        self._reader.start()
        self._dispatcher.start()
        norm_aliases = [(normalize_topic(e), normalize_topic(i)) for e, i in aliases]
        self._request(wire.hello(name, admin=admin, aliases=norm_aliases, pid=pid))

    # ------------------------------------------------------------ plumbing

    def _send(self, data):
        with self._write_lock:
            self._sock.sendall(data)

    def _request(self, data):
        """Send a frame and wait for its ordered OK/ERROR/SNAPSHOT reply."""
        with self._request_lock:
            with self._reply_ready:
                self._reply = None
            self._send(data)
            with self._reply_ready:
                if self._reply is None:
                    self._reply_ready.wait(timeout=self._timeout)
                reply = self._reply
                self._reply = None
        if reply is None:
            if self._closed.is_set():
                raise BrokerUnreachable(f"broker connection to {self.uri} lost")
            raise BrokerUnreachable(f"no reply from broker at {self.uri}")
        kind, body = reply
        if kind == wire.ERROR:
            code, message = wire.parse_error(body)
            raise error_for_code(code, message)
        return kind, body

    def _read_loop(self):
        recv = self._recv_exactly
        try:
            while not self._closed.is_set():
                kind, body = wire.read_frame(recv)
                if kind == wire.DELIVER:
                    self._deliveries.append(wire.parse_deliver(body))
                    self._delivery_wake.set()
                elif kind == wire.PING:
                    self._send(wire.pong())
                elif kind == wire.PONG:
                    pass
                elif kind == wire.ERROR and self._is_async_error(body):
                    code, message = wire.parse_error(body)
                    log.warning("broker error for %s: %s", self.name, message)
                    if self.on_async_error:
                        self.on_async_error(code, message)
                else:
                    with self._reply_ready:
                        self._reply = (kind, body)
                        self._reply_ready.notify_all()
        except (OSError, ProtocolError):
            pass
        finally:
            self._closed.set()
            self._delivery_wake.set()
            with self._reply_ready:
                self._reply_ready.notify_all()

    @staticmethod
    def _is_async_error(body) -> bool:
        try:
            _, message = wire.parse_error(body)
        except ProtocolError:
            return False
        return message.startswith("async:")

    def _recv_exactly(self, n):
        buf = b""
        while len(buf) < n:
            chunk = self._sock.recv(n - len(buf))
            if not chunk:
                raise OSError("connection closed")
            buf += chunk
        return buf

    def _dispatch_loop(self):
        while not self._closed.is_set() or self._deliveries:
            if not self._deliveries:
                self._delivery_wake.wait(timeout=0.2)
                self._delivery_wake.clear()
                continue
            topic, schema, seq, ts, payload, origin = self._deliveries.popleft()
            self._dispatch(Incoming(topic, schema, seq, ts, origin,
                                    Payload.from_bytes(payload), self.registry))

    # ------------------------------------------------------------- surface

    def _advertise(self, topic, schema):
        _, body = self._request(wire.advertise(topic, schema))
        return wire.parse_ok(body)

    def _subscribe(self, topic, schema):
        _, body = self._request(wire.subscribe(topic, schema or ""))
        return wire.parse_ok(body)

    def _remove(self, handle_id):
        self._request(wire.unsubscribe(handle_id))

    def _publish(self, handle, value, data, origin):
        if data is None:
            data = self.registry.encode(handle.schema, value)
        # counter and socket write under one lock: predicted seq == broker seq
        with handle._seq_lock:
            with self._write_lock:
                if self._closed.is_set():
                    raise BrokerUnreachable(f"broker connection to {self.uri} lost")
                handle._seq += 1
                seq = handle._seq
                self._sock.sendall(wire.publish(handle.id, data, origin))
        return seq

    def _set_alias(self, node, external, internal):
        self._request(wire.alias_set(node, external, internal))

    def _clear_alias(self, node, external):
        self._request(wire.alias_clear(node, external))

    def _snapshot(self):
        kind, body = self._request(wire.snapshot_req())
        if kind != wire.SNAPSHOT_RESP:
            raise ProtocolError(f"expected SNAPSHOT_RESP, got 0x{kind:02x}")
        return snapshot_from_json(wire.Reader(body).string())

    def close(self):
        if self._closed.is_set():
            return
        self._closed.set()
        self._delivery_wake.set()
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        self._dispatcher.join(timeout=2.0)
