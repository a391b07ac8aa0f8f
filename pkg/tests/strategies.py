"""Hypothesis strategies for random schemas and conforming values."""

from __future__ import annotations

import struct

from hypothesis import strategies as st

from nodewrap.serde.types import FixedList, Scalar, Schema, Struct, VarList

idents = st.from_regex(r"[a-z][a-z0-9_]{0,7}", fullmatch=True)

f64s = st.floats(allow_nan=False, width=64)
f32s = st.floats(allow_nan=False, width=32).map(lambda v: struct.unpack("<f", struct.pack("<f", v))[0])


def _scalar_types():
    return st.sampled_from([Scalar(k) for k in ("f64", "f32", "i64", "i32", "u8", "bool", "str")])


def field_types(max_depth=3):
    return st.recursive(
        _scalar_types(),
        lambda inner: st.one_of(
            st.builds(VarList, inner),
            st.builds(FixedList, inner, st.integers(min_value=0, max_value=3)),
            structs(inner),
        ),
        max_leaves=6,
    )


def structs(inner):
    field = st.tuples(idents, inner)
    return st.lists(field, min_size=1, max_size=4, unique_by=lambda f: f[0]).map(
        lambda fs: Struct(tuple(fs))
    )


schemas = st.builds(Schema, st.from_regex(r"[A-Z][A-Za-z0-9_]{0,7}", fullmatch=True), structs(field_types()))


def value_for(ftype):
    if isinstance(ftype, Scalar):
        return {
            "f64": f64s,
            "f32": f32s,
            "i64": st.integers(min_value=-(1 << 63), max_value=(1 << 63) - 1),
            "i32": st.integers(min_value=-(1 << 31), max_value=(1 << 31) - 1),
            "u8": st.integers(min_value=0, max_value=255),
            "bool": st.booleans(),
            "str": st.text(max_size=12),
        }[ftype.kind]
    if isinstance(ftype, FixedList):
        return st.lists(value_for(ftype.elem), min_size=ftype.length, max_size=ftype.length)
    if isinstance(ftype, VarList):
        return st.lists(value_for(ftype.elem), max_size=3)
    if isinstance(ftype, Struct):
        return st.fixed_dictionaries({name: value_for(ft) for name, ft in ftype.fields})
    raise AssertionError(ftype)


schema_and_value = schemas.flatmap(lambda s: st.tuples(st.just(s), value_for(s.root)))
