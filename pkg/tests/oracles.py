"""Independent re-implementations used as test oracles.

These deliberately do not import the production codec internals: the layout
rules are re-derived from scratch (struct module, manual recursion) so a bug
in the shipped encoder cannot hide in its own mirror.
"""

from __future__ import annotations

import math
import struct


def oracle_encode(ftype, value, schemas):
    """Reference encoder: declaration order, LE numerics, u32 count prefixes."""
    from nodewrap.serde.types import FixedList, Ref, Scalar, Struct, VarList

    if isinstance(ftype, Scalar):
        k = ftype.kind
        if k == "f64":
            return struct.pack("<d", float(value))
        if k == "f32":
            return struct.pack("<f", float(value))
        if k == "i64":
            return struct.pack("<q", value)
        if k == "i32":
            return struct.pack("<i", value)
        if k == "u8":
            return struct.pack("<B", value)
        if k == "bool":
            return b"\x01" if value else b"\x00"
        if k == "str":
            raw = value.encode("utf-8")
            return struct.pack("<I", len(raw)) + raw
        raise AssertionError(k)
    if isinstance(ftype, FixedList):
        assert len(value) == ftype.length
        return b"".join(oracle_encode(ftype.elem, v, schemas) for v in value)
    if isinstance(ftype, VarList):
        return struct.pack("<I", len(value)) + b"".join(
            oracle_encode(ftype.elem, v, schemas) for v in value
        )
    if isinstance(ftype, Struct):
        return b"".join(oracle_encode(ft, value[name], schemas) for name, ft in ftype.fields)
    if isinstance(ftype, Ref):
        return oracle_encode(schemas[ftype.schema].root, value, schemas)
    raise AssertionError(ftype)


def values_equal(a, b):
    """Deep equality that treats floats by bit pattern (NaN-safe)."""
    if isinstance(a, float) and isinstance(b, float):
        if math.isnan(a) and math.isnan(b):
            return True
        return struct.pack("<d", a) == struct.pack("<d", b)
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(values_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    return type(a) is type(b) and a == b


def clamp_oracle(x, lo, hi):
    return min(max(x, lo), hi)


def wrap_angle_oracle(theta):
    """Normalize into (-pi, pi] by repeated shifting (independent of math.remainder)."""
    two_pi = 2.0 * math.pi
    while theta > math.pi:
        theta -= two_pi
    while theta <= -math.pi:
        theta += two_pi
    return theta


def euler_unicycle_oracle(x, y, theta, v, w, dt, substeps):
    """Explicit-Euler integration with many substeps; converges to the exact arc."""
    h = dt / substeps
    for _ in range(substeps):
        x += v * math.cos(theta) * h
        y += v * math.sin(theta) * h
        theta += w * h
    return x, y, wrap_angle_oracle(theta)


def fit_circle_oracle(points):
    """Kasa algebraic least-squares circle fit; returns (cx, cy, r).

    Solves the normal equations of x^2 + y^2 + D x + E y + F = 0 with a
    hand-rolled 3x3 solve so the scenario code's fit can be cross-checked.
    """
    n = len(points)
    sx = sum(p[0] for p in points)
    sy = sum(p[1] for p in points)
    sxx = sum(p[0] * p[0] for p in points)
    syy = sum(p[1] * p[1] for p in points)
    sxy = sum(p[0] * p[1] for p in points)
    sxz = sum(p[0] * (p[0] ** 2 + p[1] ** 2) for p in points)
    syz = sum(p[1] * (p[0] ** 2 + p[1] ** 2) for p in points)
    sz = sum(p[0] ** 2 + p[1] ** 2 for p in points)
    a = [[sxx, sxy, sx], [sxy, syy, sy], [sx, sy, float(n)]]
    b = [sxz, syz, sz]
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for col in range(3):
        piv = max(range(col, 3), key=lambda r: abs(m[r][col]))
        m[col], m[piv] = m[piv], m[col]
        for r in range(3):
            if r != col and m[col][col] != 0:
                f = m[r][col] / m[col][col]
                m[r] = [mr - f * mc for mr, mc in zip(m[r], m[col])]
    d, e, f = (m[i][3] / m[i][i] for i in range(3))
    cx, cy = d / 2.0, e / 2.0
    r = math.sqrt(max(f + cx * cx + cy * cy, 0.0))
    return cx, cy, r
