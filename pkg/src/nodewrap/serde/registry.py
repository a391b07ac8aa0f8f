"""Schema registry: unique names, resolved references, no cycles.

Registration is serialized behind a lock; lookups and codec calls are
lock-free reads of immutable Schema objects, so handlers may decode
concurrently with new registrations.
"""

from __future__ import annotations

import threading

from ..errors import CyclicSchema, DuplicateNameConflict, NoSuchSchema, UnresolvedReference
from . import codec
from .text import format_schema, parse_schemas
from .types import Schema, references, type_at_path, zero_value

RAW = "raw"  # reserved schema id for opaque payloads


class SchemaRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._schemas: dict[str, Schema] = {}

    # -- registration ---------------------------------------------------

    def define(self, schema: Schema) -> str:
        """Register one schema; idempotent for identical shapes. Returns its id (the name)."""
        return self.define_all([schema])[0]

    def define_all(self, schemas: list) -> list:
        """Register a batch; references may point at the batch itself or prior registrations."""
        with self._lock:
            staged = dict(self._schemas)
            for schema in schemas:
                if schema.name == RAW:
                    raise DuplicateNameConflict(f"{RAW!r} is reserved")
                existing = staged.get(schema.name)
                if existing is not None and existing != schema:
                    raise DuplicateNameConflict(f"schema {schema.name!r} already registered with a different shape")
                staged[schema.name] = schema
            for schema in schemas:
                self._check_refs(schema, staged)
            self._check_cycles(schemas, staged)
            self._schemas = staged
        return [s.name for s in schemas]

    def define_text(self, text: str) -> list:
        return self.define_all(parse_schemas(text))

    @staticmethod
    def _check_refs(schema, staged):
        for ref in references(schema.root):
            if ref not in staged:
                raise UnresolvedReference(f"schema {schema.name!r} references unknown {ref!r}")

    @staticmethod
    def _check_cycles(schemas, staged):
        # DFS over the reference graph rooted at the new schemas.
        WHITE, GREY, BLACK = 0, 1, 2
        state: dict[str, int] = {}

        def visit(name, trail):
            mark = state.get(name, WHITE)
            if mark == BLACK:
                return
            if mark == GREY:
                cycle = " -> ".join(trail + [name])
                raise CyclicSchema(f"recursive schema references: {cycle}")
            state[name] = GREY
            for ref in references(staged[name].root):
                visit(ref, trail + [name])
            state[name] = BLACK

        for schema in schemas:
            visit(schema.name, [])

    # -- lookup -----------------------------------------------------------

    def get(self, name: str) -> Schema:
        schema = self._schemas.get(name)
        if schema is None:
            raise NoSuchSchema(f"unknown schema {name!r}")
        return schema

    def __contains__(self, name) -> bool:
        return name in self._schemas

    def names(self) -> list:
        return sorted(self._schemas)

    # -- codec conveniences ------------------------------------------------

    def encode(self, name: str, value) -> bytes:
        return codec.encode(self.get(name), value, self.get)

    def decode(self, name: str, data: bytes):
        return codec.decode(self.get(name), data, self.get)

    def validate(self, name: str, value) -> None:
        codec.validate(self.get(name), value, self.get)

    def zero(self, name: str):
        return zero_value(self.get(name).root, self.get)

    def type_at(self, name: str, path: str):
        return type_at_path(self.get(name).root, path, self.get)

    def fixed_size(self, name: str) -> int | None:
        return codec.fixed_size(self.get(name).root, self.get)

    def describe(self, name: str) -> str:
        return format_schema(self.get(name))
