"""Binary layout: declaration order, little-endian numerics, no padding.

bool is one byte (0/1); strings and variable lists carry a u32 LE element
count. Encoding is canonical: equal values produce equal bytes and every
valid byte string decodes to exactly one value.
"""

from __future__ import annotations

import struct as _struct

from ..errors import (
    MalformedLength,
    MalformedString,
    ShapeMismatch,
    TrailingBytes,
    Truncated,
)
from .types import FixedList, Ref, Scalar, Schema, Struct, VarList

_PACK = {
    "f64": _struct.Struct("<d"),
    "f32": _struct.Struct("<f"),
    "i64": _struct.Struct("<q"),
    "i32": _struct.Struct("<i"),
    "u8": _struct.Struct("<B"),
}
_RANGES = {
    "i64": (-(1 << 63), (1 << 63) - 1),
    "i32": (-(1 << 31), (1 << 31) - 1),
    "u8": (0, 255),
}
_U32 = _struct.Struct("<I")
U32_MAX = 0xFFFFFFFF


def _encode_scalar(kind, value, out):
    if kind in ("f64", "f32"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ShapeMismatch(f"expected number for {kind}, got {type(value).__name__}")
        out += _PACK[kind].pack(float(value))
    elif kind in ("i64", "i32", "u8"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ShapeMismatch(f"expected int for {kind}, got {type(value).__name__}")
        lo, hi = _RANGES[kind]
        if not lo <= value <= hi:
            raise ShapeMismatch(f"{value} out of range for {kind}")
        out += _PACK[kind].pack(value)
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ShapeMismatch(f"expected bool, got {type(value).__name__}")
        out += b"\x01" if value else b"\x00"
    elif kind == "str":
        if not isinstance(value, str):
            raise ShapeMismatch(f"expected str, got {type(value).__name__}")
        raw = value.encode("utf-8")
        if len(raw) > U32_MAX:
            raise ShapeMismatch("string too long")
        out += _U32.pack(len(raw))
        out += raw
    else:  # pragma: no cover - Scalar validates kinds
        raise ShapeMismatch(f"unknown scalar kind {kind!r}")


def _encode(ftype, value, out, resolve):
    if isinstance(ftype, Scalar):
        _encode_scalar(ftype.kind, value, out)
    elif isinstance(ftype, FixedList):
        if not isinstance(value, (list, tuple)) or len(value) != ftype.length:
            raise ShapeMismatch(f"expected list of {ftype.length} elements")
        for item in value:
            _encode(ftype.elem, item, out, resolve)
    elif isinstance(ftype, VarList):
        if not isinstance(value, (list, tuple)):
            raise ShapeMismatch("expected list")
        if len(value) > U32_MAX:
            raise ShapeMismatch("list too long")
        out += _U32.pack(len(value))
        for item in value:
            _encode(ftype.elem, item, out, resolve)
    elif isinstance(ftype, Struct):
        if not isinstance(value, dict):
            raise ShapeMismatch(f"expected mapping, got {type(value).__name__}")
        extra = set(value) - {name for name, _ in ftype.fields}
        if extra:
            raise ShapeMismatch(f"unexpected fields {sorted(extra)}")
        for name, ft in ftype.fields:
            if name not in value:
                raise ShapeMismatch(f"missing field {name!r}")
            _encode(ft, value[name], out, resolve)
    elif isinstance(ftype, Ref):
        _encode(resolve(ftype.schema).root, value, out, resolve)
    else:
        raise ShapeMismatch(f"unknown field type {ftype!r}")


def encode(schema: Schema, value, resolve=None) -> bytes:
    """Serialize `value` (nested dicts/lists/scalars) under `schema`."""
    out = bytearray()
    _encode(schema.root, value, out, resolve or _no_refs)
    return bytes(out)


def _no_refs(name):
    raise ShapeMismatch(f"schema reference {name!r} without a registry")


_ZERO_SIZE_LIST_CAP = 1 << 20


def _min_size(ftype, resolve) -> int:
    """Smallest possible encoded size of a value of this type."""
    if isinstance(ftype, Scalar):
        if ftype.kind in _PACK:
            return _PACK[ftype.kind].size
        if ftype.kind == "bool":
            return 1
        return 4  # empty string still carries its count
    if isinstance(ftype, FixedList):
        return ftype.length * _min_size(ftype.elem, resolve)
    if isinstance(ftype, VarList):
        return 4
    if isinstance(ftype, Struct):
        return sum(_min_size(ft, resolve) for _, ft in ftype.fields)
    if isinstance(ftype, Ref):
        return _min_size(resolve(ftype.schema).root, resolve)
    raise ShapeMismatch(f"unknown field type {ftype!r}")


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise Truncated(f"needed {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self):
        return _U32.unpack(self.take(4))[0]


def _decode(ftype, rd: _Reader, resolve):
    if isinstance(ftype, Scalar):
        kind = ftype.kind
        if kind in _PACK:
            return _PACK[kind].unpack(rd.take(_PACK[kind].size))[0]
        if kind == "bool":
            return rd.take(1)[0] != 0
        # str
        n = rd.u32()
        if n > len(rd.data) - rd.pos:
            raise MalformedLength(f"string length {n} exceeds remaining {len(rd.data) - rd.pos} bytes")
        try:
            return bytes(rd.take(n)).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedString(str(exc)) from None
    if isinstance(ftype, FixedList):
        return [_decode(ftype.elem, rd, resolve) for _ in range(ftype.length)]
    if isinstance(ftype, VarList):
        n = rd.u32()
        floor = _min_size(ftype.elem, resolve)
        remaining = len(rd.data) - rd.pos
        if floor > 0:
            if n * floor > remaining:
                raise MalformedLength(
                    f"list of {n} elements needs >= {n * floor} bytes, {remaining} remain")
        elif n > _ZERO_SIZE_LIST_CAP:
            # zero-size elements make any count byte-consistent; bound allocation
            raise MalformedLength(f"refusing {n}-element list of zero-size elements")
        return [_decode(ftype.elem, rd, resolve) for _ in range(n)]
    if isinstance(ftype, Struct):
        return {name: _decode(ft, rd, resolve) for name, ft in ftype.fields}
    if isinstance(ftype, Ref):
        return _decode(resolve(ftype.schema).root, rd, resolve)
    raise ShapeMismatch(f"unknown field type {ftype!r}")


def decode(schema: Schema, data: bytes, resolve=None):
    """Inverse of encode; consumes the whole input or raises."""
    rd = _Reader(memoryview(data))
    value = _decode(schema.root, rd, resolve or _no_refs)
    if rd.pos != len(data):
        raise TrailingBytes(f"{len(data) - rd.pos} bytes left after decoding {schema.name}")
    return value


def _validate(ftype, value, resolve):
    if isinstance(ftype, Scalar):
        kind = ftype.kind
        if kind in ("f64", "f32"):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ShapeMismatch(f"expected number for {kind}, got {type(value).__name__}")
        elif kind in ("i64", "i32", "u8"):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ShapeMismatch(f"expected int for {kind}, got {type(value).__name__}")
            lo, hi = _RANGES[kind]
            if not lo <= value <= hi:
                raise ShapeMismatch(f"{value} out of range for {kind}")
        elif kind == "bool":
            if not isinstance(value, bool):
                raise ShapeMismatch(f"expected bool, got {type(value).__name__}")
        elif kind == "str":
            if not isinstance(value, str):
                raise ShapeMismatch(f"expected str, got {type(value).__name__}")
    elif isinstance(ftype, FixedList):
        if not isinstance(value, (list, tuple)) or len(value) != ftype.length:
            raise ShapeMismatch(f"expected list of {ftype.length} elements")
        for item in value:
            _validate(ftype.elem, item, resolve)
    elif isinstance(ftype, VarList):
        if not isinstance(value, (list, tuple)):
            raise ShapeMismatch("expected list")
        for item in value:
            _validate(ftype.elem, item, resolve)
    elif isinstance(ftype, Struct):
        if not isinstance(value, dict):
            raise ShapeMismatch(f"expected mapping, got {type(value).__name__}")
        extra = set(value) - {name for name, _ in ftype.fields}
        if extra:
            raise ShapeMismatch(f"unexpected fields {sorted(extra)}")
        for name, ft in ftype.fields:
            if name not in value:
                raise ShapeMismatch(f"missing field {name!r}")
            _validate(ft, value[name], resolve)
    elif isinstance(ftype, Ref):
        _validate(resolve(ftype.schema).root, value, resolve)
    else:
        raise ShapeMismatch(f"unknown field type {ftype!r}")


def validate(schema: Schema, value, resolve=None) -> None:
    """Shape-check without building bytes (used by the lazy-encode publish path)."""
    _validate(schema.root, value, resolve or _no_refs)


def fixed_size(ftype, resolve) -> int | None:
    """Static encoded size in bytes, or None when it depends on the value."""
    if isinstance(ftype, Scalar):
        if ftype.kind in _PACK:
            return _PACK[ftype.kind].size
        if ftype.kind == "bool":
            return 1
        return None  # str
    if isinstance(ftype, FixedList):
        inner = fixed_size(ftype.elem, resolve)
        return None if inner is None else inner * ftype.length
    if isinstance(ftype, VarList):
        return None
    if isinstance(ftype, Struct):
        total = 0
        for _, ft in ftype.fields:
            inner = fixed_size(ft, resolve)
            if inner is None:
                return None
            total += inner
        return total
    if isinstance(ftype, Ref):
        return fixed_size(resolve(ftype.schema).root, resolve)
    raise ShapeMismatch(f"unknown field type {ftype!r}")
