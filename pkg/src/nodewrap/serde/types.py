"""Schema shapes: scalar kinds, lists, inline structs and named references.

A schema is an ordered list of (name, type) fields. Field types compose:
fixed/variable lists of any element type, anonymous inline structs, and
references to other registered schemas (the reference graph must be acyclic).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import BadFieldPath, InvalidIdentifier, ShapeMismatch

SCALAR_KINDS = ("f64", "f32", "i64", "i32", "u8", "bool", "str")

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def check_identifier(name: str, what: str = "identifier") -> str:
    if not isinstance(name, str) or not _IDENT.match(name):
        raise InvalidIdentifier(f"invalid {what}: {name!r}")
    return name


@dataclass(frozen=True)
class Scalar:
    kind: str  # one of SCALAR_KINDS

    def __post_init__(self):
        if self.kind not in SCALAR_KINDS:
            raise ShapeMismatch(f"unknown scalar kind {self.kind!r}")


@dataclass(frozen=True)
class FixedList:
    elem: "FieldType"
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ShapeMismatch("fixed list length must be >= 0")


@dataclass(frozen=True)
class VarList:
    elem: "FieldType"


@dataclass(frozen=True)
class Ref:
    schema: str


@dataclass(frozen=True)
class Struct:
    fields: tuple  # of (name, FieldType)

    def __post_init__(self):
        seen = set()
        for name, _ in self.fields:
            check_identifier(name, "field name")
            if name in seen:
                raise ShapeMismatch(f"duplicate field name {name!r}")
            seen.add(name)

    def field_type(self, name):
        for fname, ftype in self.fields:
            if fname == name:
                return ftype
        return None


FieldType = object  # union of the five classes above; kept informal


@dataclass(frozen=True)
class Schema:
    """A named message layout: the unit stored in a registry."""

    name: str
    root: Struct

    def __post_init__(self):
        check_identifier(self.name, "schema name")

    @property
    def fields(self):
        return self.root.fields


def struct(*fields) -> Struct:
    """Convenience constructor: struct(("x", Scalar("f64")), ...)."""
    return Struct(tuple(fields))


def references(ftype) -> set:
    """All schema names a field type refers to, transitively through inline shapes."""
    if isinstance(ftype, Ref):
        return {ftype.schema}
    if isinstance(ftype, (FixedList, VarList)):
        return references(ftype.elem)
    if isinstance(ftype, Struct):
        out = set()
        for _, ft in ftype.fields:
            out |= references(ft)
        return out
    return set()


def type_at_path(root: Struct, path: str, resolve):
    """Field type at a dotted path like "linear.x"; `resolve` maps Ref -> Schema.

    List elements are addressed with a numeric segment ("transforms.0.x").
    Raises BadFieldPath when the path does not exist in the shape.
    """
    ftype = root
    for seg in path.split("."):
        if isinstance(ftype, Ref):
            ftype = resolve(ftype.schema).root
        if isinstance(ftype, Struct):
            nxt = ftype.field_type(seg)
            if nxt is None:
                raise BadFieldPath(f"no field {seg!r} in path {path!r}")
            ftype = nxt
        elif isinstance(ftype, (FixedList, VarList)):
            if not seg.isdigit():
                raise BadFieldPath(f"list index expected at {seg!r} in {path!r}")
            ftype = ftype.elem
        else:
            raise BadFieldPath(f"path {path!r} descends into scalar at {seg!r}")
    if isinstance(ftype, Ref):
        ftype = resolve(ftype.schema).root
    return ftype


def zero_value(ftype, resolve):
    """The all-defaults value of a field type (numbers 0, strings empty, lists empty/zeroed)."""
    if isinstance(ftype, Scalar):
        if ftype.kind in ("f64", "f32"):
            return 0.0
        if ftype.kind == "bool":
            return False
        if ftype.kind == "str":
            return ""
        return 0
    if isinstance(ftype, FixedList):
        return [zero_value(ftype.elem, resolve) for _ in range(ftype.length)]
    if isinstance(ftype, VarList):
        return []
    if isinstance(ftype, Ref):
        return zero_value(resolve(ftype.schema).root, resolve)
    if isinstance(ftype, Struct):
        return {name: zero_value(ft, resolve) for name, ft in ftype.fields}
    raise ShapeMismatch(f"unknown field type {ftype!r}")
