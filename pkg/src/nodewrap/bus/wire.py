"""Framed wire protocol.

Frame = u32 LE body length + u8 kind + body. Strings and payloads are
u32-LE-length-prefixed; numbers little-endian. Bodies may carry a trailing
extension block (u8 flags + fields) after the fixed fields of their kind;
parsers written to the base layout simply stop before it.
"""

from __future__ import annotations

import struct

from ..errors import ProtocolError

HELLO = 0x01
ADVERTISE = 0x02
SUBSCRIBE = 0x03
UNSUBSCRIBE = 0x04
PUBLISH = 0x05
DELIVER = 0x06
ALIAS_SET = 0x07
ALIAS_CLEAR = 0x08
SNAPSHOT_REQ = 0x09
SNAPSHOT_RESP = 0x0A
PING = 0x0B
PONG = 0x0C
ERROR = 0x0D
OK = 0x0E

KIND_NAMES = {
    HELLO: "HELLO", ADVERTISE: "ADVERTISE", SUBSCRIBE: "SUBSCRIBE",
    UNSUBSCRIBE: "UNSUBSCRIBE", PUBLISH: "PUBLISH", DELIVER: "DELIVER",
    ALIAS_SET: "ALIAS_SET", ALIAS_CLEAR: "ALIAS_CLEAR",
    SNAPSHOT_REQ: "SNAPSHOT_REQ", SNAPSHOT_RESP: "SNAPSHOT_RESP",
    PING: "PING", PONG: "PONG", ERROR: "ERROR", OK: "OK",
}

# HELLO extension flags
F_ADMIN = 0x01
F_ALIASES = 0x02
F_PID = 0x04
# payload extension flags
F_ORIGIN = 0x01

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_U16 = struct.Struct("<H")
MAX_BODY = 64 * 1024 * 1024


class Writer:
    def __init__(self):
        self.buf = bytearray()

    def u8(self, v):
        self.buf.append(v)
        return self

    def u16(self, v):
        self.buf += _U16.pack(v)
        return self

    def u32(self, v):
        self.buf += _U32.pack(v)
        return self

    def u64(self, v):
        self.buf += _U64.pack(v)
        return self

    def string(self, s):
        raw = s.encode("utf-8")
        self.u32(len(raw))
        self.buf += raw
        return self

    def blob(self, b):
        self.u32(len(b))
        self.buf += b
        return self


class Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def _take(self, n):
        if self.pos + n > len(self.data):
            raise ProtocolError(f"frame body truncated at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self):
        return self._take(1)[0]

    def u16(self):
        return _U16.unpack(self._take(2))[0]

    def u32(self):
        return _U32.unpack(self._take(4))[0]

    def u64(self):
        return _U64.unpack(self._take(8))[0]

    def string(self):
        n = self.u32()
        try:
            return bytes(self._take(n)).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"invalid utf-8 in string: {exc}") from None

    def blob(self):
        return bytes(self._take(self.u32()))

    @property
    def remaining(self):
        return len(self.data) - self.pos


def frame(kind: int, body: bytes) -> bytes:
    return _U32.pack(len(body)) + bytes([kind]) + body


def read_frame(sock_read) -> tuple:
    """Read one frame using sock_read(n) -> exactly-n bytes (or raise)."""
    header = sock_read(5)
    (length,) = _U32.unpack(header[:4])
    kind = header[4]
    if length > MAX_BODY:
        raise ProtocolError(f"frame body of {length} bytes exceeds limit")
    body = sock_read(length) if length else b""
    return kind, body


# --- body builders -----------------------------------------------------------

def hello(name, *, admin=False, aliases=None, pid=None) -> bytes:
    w = Writer().string(name)
    flags = (F_ADMIN if admin else 0) | (F_ALIASES if aliases else 0) | (F_PID if pid is not None else 0)
    if flags:
        w.u8(flags)
        if aliases:
            w.u16(len(aliases))
            for ext, internal in aliases:
                w.string(ext).string(internal)
        if pid is not None:
            w.u64(pid)
    return frame(HELLO, bytes(w.buf))


def parse_hello(body):
    r = Reader(body)
    name = r.string()
    admin, aliases, pid = False, [], None
    if r.remaining:
        flags = r.u8()
        admin = bool(flags & F_ADMIN)
        if flags & F_ALIASES:
            for _ in range(r.u16()):
                aliases.append((r.string(), r.string()))
        if flags & F_PID:
            pid = r.u64()
    return name, admin, aliases, pid


def advertise(topic, schema) -> bytes:
    return frame(ADVERTISE, bytes(Writer().string(topic).string(schema).buf))


def subscribe(topic, schema) -> bytes:
    return frame(SUBSCRIBE, bytes(Writer().string(topic).string(schema or "").buf))


def unsubscribe(handle_id) -> bytes:
    return frame(UNSUBSCRIBE, bytes(Writer().u32(handle_id).buf))


def _payload_ext(w, origin):
    if origin is not None:
        w.u8(F_ORIGIN)
        w.string(origin[0]).u64(origin[1])


def publish(handle_id, payload, origin=None) -> bytes:
    w = Writer().u32(handle_id).blob(payload)
    _payload_ext(w, origin)
    return frame(PUBLISH, bytes(w.buf))


def parse_publish(body):
    r = Reader(body)
    handle_id = r.u32()
    payload = r.blob()
    origin = _parse_payload_ext(r)
    return handle_id, payload, origin


def _parse_payload_ext(r):
    if r.remaining:
        flags = r.u8()
        if flags & F_ORIGIN:
            return (r.string(), r.u64())
    return None


def deliver(topic, schema, seq, timestamp, payload, origin=None) -> bytes:
    w = Writer().string(topic).string(schema or "").u64(seq).u64(timestamp).blob(payload)
    _payload_ext(w, origin)
    return frame(DELIVER, bytes(w.buf))


def parse_deliver(body):
    r = Reader(body)
    topic = r.string()
    schema = r.string() or None
    seq = r.u64()
    timestamp = r.u64()
    payload = r.blob()
    origin = _parse_payload_ext(r)
    return topic, schema, seq, timestamp, payload, origin


def alias_set(node, external, internal) -> bytes:
    return frame(ALIAS_SET, bytes(Writer().string(node).string(external).string(internal).buf))


def alias_clear(node, external) -> bytes:
    return frame(ALIAS_CLEAR, bytes(Writer().string(node).string(external).buf))


def snapshot_req() -> bytes:
    return frame(SNAPSHOT_REQ, b"")


def snapshot_resp(encoded: str) -> bytes:
    return frame(SNAPSHOT_RESP, bytes(Writer().string(encoded).buf))


def ping() -> bytes:
    return frame(PING, b"")


def pong() -> bytes:
    return frame(PONG, b"")


def error(code, message) -> bytes:
    return frame(ERROR, bytes(Writer().u16(code).string(message).buf))


def parse_error(body):
    r = Reader(body)
    return r.u16(), r.string()


def ok(handle_id=0) -> bytes:
    return frame(OK, bytes(Writer().u32(handle_id).buf))


def parse_ok(body):
    return Reader(body).u32()
