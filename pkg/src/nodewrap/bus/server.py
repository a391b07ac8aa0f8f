"""TCP broker: one process, thread-per-connection, framed protocol.

Each connection runs a reader thread (frame dispatch into the router) and a
writer thread (control replies in request order, then subscription queues).
A keepalive ticker pings idle connections and reaps dead ones, after which
the router garbage-collects their endpoints.
"""

from __future__ import annotations

import logging
import socket
import threading
from collections import deque

from ..errors import NodewrapError, ProtocolError
from . import wire
from .router import Payload, Router
from .snapshot import snapshot_to_json

log = logging.getLogger(__name__)

DEFAULT_PORT = 11411


class _ConnectionClosed(Exception):
    pass


class _Connection:
    def __init__(self, server, sock, peer):
        self.server = server
        self.sock = sock
        self.peer = peer
        self.session = None
        self.outbox = deque()          # control frames, FIFO
        self.wake = threading.Event()
        self.closed = threading.Event()
        self.last_rx = server.router.now_ns()
        self.last_tx = server.router.now_ns()
        self.reader = threading.Thread(target=self._read_loop, name=f"broker-rx-{peer}", daemon=True)
        self.writer = threading.Thread(target=self._write_loop, name=f"broker-tx-{peer}", daemon=True)

    def start(self):
        self.reader.start()
        self.writer.start()

    # sink interface used by the router
    def notify(self):
        self.wake.set()

    def send_control(self, data: bytes):
        self.outbox.append(data)
        self.wake.set()

    def close(self):
        if self.closed.is_set():
            return
        self.closed.set()
        self.wake.set()
        if self.session is not None:
            self.server.router.detach(self.session)
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
        self.server._forget(self)

    # ------------------------------------------------------------- reading

    def _recv_exactly(self, n):
        buf = b""
        while len(buf) < n:
            chunk = self.sock.recv(n - len(buf))
            if not chunk:
                raise _ConnectionClosed()
            buf += chunk
        return buf

    def _read_loop(self):
        try:
            kind, body = wire.read_frame(self._recv_exactly)
            self.last_rx = self.server.router.now_ns()
            if kind != wire.HELLO:
                self.send_control(wire.error(ProtocolError.code, "expected HELLO"))
                self._flush_blocking()
                return
            name, admin, aliases, pid = wire.parse_hello(body)
            try:
                self.session = self.server.router.attach(
                    name, self, admin=admin, pid=pid, aliases=aliases
                )
            except NodewrapError as exc:
                self.send_control(wire.error(exc.code, str(exc)))
                self._flush_blocking()
                return
            self.send_control(wire.ok(0))
            while not self.closed.is_set():
                kind, body = wire.read_frame(self._recv_exactly)
                self.last_rx = self.server.router.now_ns()
                self._dispatch(kind, body)
        except (_ConnectionClosed, OSError):
            pass
        except ProtocolError as exc:
            self.send_control(wire.error(exc.code, str(exc)))
            self._flush_blocking()
        except Exception:
            log.exception("broker connection %s failed", self.peer)
        finally:
            self.close()

    def _dispatch(self, kind, body):
        router = self.server.router
        try:
            if kind == wire.PUBLISH:
                handle_id, payload, origin = wire.parse_publish(body)
                try:
                    router.publish(self.session, handle_id, Payload.from_bytes(payload), origin)
                except NodewrapError as exc:
                    # fire-and-forget op: report asynchronously, keep session up
                    self.send_control(wire.error(exc.code, f"async: publish failed: {exc}"))
            elif kind == wire.ADVERTISE:
                r = wire.Reader(body)
                handle = router.advertise(self.session, r.string(), r.string())
                self.send_control(wire.ok(handle))
            elif kind == wire.SUBSCRIBE:
                r = wire.Reader(body)
                handle = router.subscribe(self.session, r.string(), r.string() or None)
                self.send_control(wire.ok(handle))
            elif kind == wire.UNSUBSCRIBE:
                r = wire.Reader(body)
                handle = r.u32()
                router.remove_endpoint(self.session, handle)
                self.send_control(wire.ok(handle))
            elif kind == wire.ALIAS_SET:
                r = wire.Reader(body)
                router.set_alias(self.session, r.string(), r.string(), r.string())
                self.send_control(wire.ok(0))
            elif kind == wire.ALIAS_CLEAR:
                r = wire.Reader(body)
                router.clear_alias(self.session, r.string(), r.string())
                self.send_control(wire.ok(0))
            elif kind == wire.SNAPSHOT_REQ:
                self.send_control(wire.snapshot_resp(snapshot_to_json(router.snapshot())))
            elif kind == wire.PING:
                self.send_control(wire.pong())
            elif kind == wire.PONG:
                pass
            else:
                self.send_control(wire.error(ProtocolError.code, f"unexpected frame kind 0x{kind:02x}"))
        except NodewrapError as exc:
            self.send_control(wire.error(exc.code, str(exc)))

    # ------------------------------------------------------------- writing

    def _write_loop(self):
        try:
            while True:
                if self._drain():
                    continue
                if self.closed.is_set() and not self.outbox:
                    return
                self.wake.wait(timeout=0.2)
                self.wake.clear()
        except OSError:
            self.close()
        except Exception:
            log.exception("broker writer %s failed", self.peer)
            self.close()

    def _drain(self) -> bool:
        wrote = False
        while self.outbox:
            self.sock.sendall(self.outbox.popleft())
            self.last_tx = self.server.router.now_ns()
            wrote = True
        session = self.session
        if session is None:
            return wrote
        for sub in list(session.subs.values()):
            queue = sub.queue
            budget = 256  # bounded batch so replies and other subs stay timely
            while queue and budget:
                d = queue.popleft()
                data = wire.deliver(d.topic, d.schema, d.seq, d.ts_ns, d.payload.to_bytes(), d.origin)
                self.sock.sendall(data)
                self.last_tx = self.server.router.now_ns()
                wrote = True
                budget -= 1
            if self.outbox:
                break
        return wrote

    def _flush_blocking(self):
        try:
            while self.outbox:
                self.sock.sendall(self.outbox.popleft())
        except OSError:
            pass


class BrokerServer:
    """The broker process core: listen, accept, keep sessions alive."""

    def __init__(self, host="127.0.0.1", port=DEFAULT_PORT, *, router=None,
                 keepalive_interval=5.0, keepalive_timeout=15.0, queue_capacity=None):
        self.host = host
        self._requested_port = port
        self.router = router or (Router(queue_capacity=queue_capacity) if queue_capacity else Router())
        self.keepalive_interval = keepalive_interval
        self.keepalive_timeout = keepalive_timeout
        self._listener = None
        self._connections = set()
        self._conn_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads = []

    # ------------------------------------------------------------ lifecycle

    def start(self) -> "BrokerServer":
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((self.host, self._requested_port))
        self._listener.listen(64)
        accept = threading.Thread(target=self._accept_loop, name="broker-accept", daemon=True)
        keeper = threading.Thread(target=self._keepalive_loop, name="broker-keepalive", daemon=True)
        accept.start()
        keeper.start()
        self._threads = [accept, keeper]
        log.info("broker listening on %s", self.uri)
        return self

    def stop(self):
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._conn_lock:
            conns = list(self._connections)
        for conn in conns:
            conn.close()

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    @property
    def uri(self) -> str:
        return f"{self.host}:{self.port}"

    # ------------------------------------------------------------- internals

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Connection(self, sock, f"{addr[0]}:{addr[1]}")
            with self._conn_lock:
                self._connections.add(conn)
            conn.start()

    def _forget(self, conn):
        with self._conn_lock:
            self._connections.discard(conn)

    def _keepalive_loop(self):
        interval_ns = int(self.keepalive_interval * 1e9)
        timeout_ns = int(self.keepalive_timeout * 1e9)
        while not self._stop.wait(min(self.keepalive_interval / 2, 1.0)):
            now = self.router.now_ns()
            with self._conn_lock:
                conns = list(self._connections)
            for conn in conns:
                if now - conn.last_rx > timeout_ns:
                    log.warning("dropping dead session %s", conn.session.name if conn.session else conn.peer)
                    conn.close()
                elif now - conn.last_rx > interval_ns and now - conn.last_tx > interval_ns:
                    conn.send_control(wire.ping())
