"""Pipeline evaluation: stages over a mutable working copy of the message.

Arithmetic is all f64 with IEEE semantics (division by zero yields
+/-inf or NaN, never an exception). Assignments coerce to the target
field's type: integers round to nearest and saturate, f32 rounds through
single precision, bool is truthiness.

`drop` and a failed `gate` abandon the whole evaluation: the forward list
comes back empty no matter what ran before them.
"""

from __future__ import annotations

import copy
import logging
import math
import struct as _struct
from dataclasses import dataclass, field

from ..errors import BadFieldPath, NoEmit, NotPublished, StageTypeError
from ..serde.types import FixedList, Ref, Scalar, Struct, VarList
from .ast import (
    Assign,
    Binary,
    Bool,
    Clamp,
    Drop,
    DropStmt,
    Emit,
    ExprStage,
    Forward,
    Gate,
    If,
    Log,
    MsgPath,
    Num,
    ParamRef,
    PipelineSpec,
    Relay,
    Scale,
    Str,
    Unary,
)

log = logging.getLogger(__name__)

_I32 = (-(1 << 31), (1 << 31) - 1)
_I64 = (-(1 << 63), (1 << 63) - 1)


@dataclass
class EvalContext:
    params: object = None            # ParameterStore or None
    registry: object = None          # SchemaRegistry or None
    publications: object = None      # set of topics, or None to skip the check
    log_sink: object = None          # callable(label, value)


@dataclass
class EvalResult:
    forwards: list = field(default_factory=list)  # (topic, value-or-bytes, schema)
    dropped: bool = False
    working: object = None
    working_schema: object = None


class RawPayload:
    """Undecoded message bytes plus the schema hint that travelled with them."""

    __slots__ = ("data", "schema_hint")

    def __init__(self, data: bytes, schema_hint: str | None = None):
        self.data = data
        self.schema_hint = schema_hint


class _Abort(Exception):
    """Internal: evaluation failed; the message is dropped and the error counted."""

    def __init__(self, error):
        self.error = error
        super().__init__(str(error))


def evaluate(spec: PipelineSpec, message, ctx: EvalContext, schema: str | None = None) -> EvalResult:
    """Run the stages. `message` is a decoded dict, a RawPayload, or None (timer entry).

    Raw input admits only relay/drop/log stages; a typed stage on raw input
    raises StageTypeError (callers count it and keep the node running).
    """
    result = EvalResult()
    if isinstance(message, RawPayload):
        result.working = message
        result.working_schema = message.schema_hint
    elif message is None:
        result.working = None
        result.working_schema = None
    else:
        result.working = copy.deepcopy(message)
        result.working_schema = schema

    for stage in spec.stages:
        if isinstance(stage, Drop):
            return EvalResult(dropped=True)
        if isinstance(stage, Log):
            sink = ctx.log_sink or (lambda label, value: log.info("%s: %r", label, value))
            sink(stage.label, _loggable(result.working))
            continue
        if isinstance(stage, Relay):
            _check_target(ctx, stage.topic)
            result.forwards.append(_forward_entry(stage.topic, result))
            continue
        if isinstance(stage, ExprStage):
            # statements check their own message needs: emit-only programs run without input
            if _run_program(stage.program, result, ctx) is _DROPPED:
                return EvalResult(dropped=True)
            continue
        working = _require_typed(result, stage)
        if isinstance(stage, Clamp):
            value = _to_number(_get_path(working, stage.path))
            _set_path_coerced(result, stage.path, min(max(value, stage.lo), stage.hi), ctx)
        elif isinstance(stage, Scale):
            value = _to_number(_get_path(working, stage.path))
            _set_path_coerced(result, stage.path, value * stage.factor, ctx)
        elif isinstance(stage, Gate):
            if not _truthy(_eval_expr(stage.cond, result, ctx)):
                return EvalResult(dropped=True)
        else:  # pragma: no cover
            raise StageTypeError(f"unhandled stage {stage!r}")
    return result


def eval_pipeline(spec: PipelineSpec, message, ctx: EvalContext, schema: str | None = None) -> list:
    """Public form: the ordered forward list [(topic, value-or-bytes), ...]."""
    result = evaluate(spec, message, ctx, schema)
    return [(topic, payload) for topic, payload, _schema in result.forwards]


def emit_program(spec: PipelineSpec, ctx: EvalContext) -> list:
    """Timer entry point: run with no input message; requires a constructor."""
    if not spec.has_emit:
        raise NoEmit(f"pipeline {spec.name!r} has no emit constructor")
    result = evaluate(spec, None, ctx)
    return [(topic, payload) for topic, payload, _schema in result.forwards]


# --- static checking ----------------------------------------------------------


def check_pipeline(spec: PipelineSpec, *, registry=None, input_schema=None, publications=None) -> None:
    """Install-time validation: field paths against the schema, forward targets
    against the node's publications, emit schemas against the registry."""
    if publications is not None:
        for topic in spec.forward_topics():
            if topic not in publications:
                raise NotPublished(f"pipeline {spec.name!r} forwards to undeclared topic {topic}")
    if registry is None:
        return
    for stage in spec.stages:
        if isinstance(stage, (Clamp, Scale)) and input_schema and input_schema in registry:
            ftype = registry.type_at(input_schema, stage.path)
            if not (isinstance(ftype, Scalar) and ftype.kind != "str"):
                raise BadFieldPath(f"{stage.path!r} is not numeric in {input_schema}")
        elif isinstance(stage, Gate) and input_schema and input_schema in registry:
            _check_expr_paths(stage.cond, registry, input_schema)
        elif isinstance(stage, ExprStage):
            _check_program(stage.program, registry, input_schema)


def _check_program(stmts, registry, input_schema):
    for stmt in stmts:
        if isinstance(stmt, Assign) and input_schema and input_schema in registry:
            registry.type_at(input_schema, stmt.path)
            _check_expr_paths(stmt.expr, registry, input_schema)
        elif isinstance(stmt, Emit):
            if stmt.schema not in registry:
                raise BadFieldPath(f"emit references unknown schema {stmt.schema!r}")
            for path, expr in stmt.assigns:
                registry.type_at(stmt.schema, path)
                _check_expr_paths(expr, registry, input_schema)
        elif isinstance(stmt, If):
            _check_expr_paths(stmt.cond, registry, input_schema)
            _check_program(stmt.then, registry, input_schema)
            _check_program(stmt.orelse, registry, input_schema)


def _check_expr_paths(expr, registry, input_schema):
    if isinstance(expr, MsgPath) and input_schema and input_schema in registry:
        registry.type_at(input_schema, expr.path)
    elif isinstance(expr, Unary):
        _check_expr_paths(expr.operand, registry, input_schema)
    elif isinstance(expr, Binary):
        _check_expr_paths(expr.left, registry, input_schema)
        _check_expr_paths(expr.right, registry, input_schema)


# --- execution internals ----------------------------------------------------

_DROPPED = object()


def _run_program(stmts, result, ctx):
    for stmt in stmts:
        if isinstance(stmt, DropStmt):
            return _DROPPED
        if isinstance(stmt, Assign):
            working = _require_typed(result, stmt)
            value = _eval_expr(stmt.expr, result, ctx)
            _set_path_coerced(result, stmt.path, value, ctx)
        elif isinstance(stmt, Forward):
            _check_target(ctx, stmt.topic)
            result.forwards.append(_forward_entry(stmt.topic, result))
        elif isinstance(stmt, Emit):
            _check_target(ctx, stmt.topic)
            if ctx.registry is None or stmt.schema not in ctx.registry:
                raise _Abort(BadFieldPath(f"emit references unknown schema {stmt.schema!r}"))
            value = ctx.registry.zero(stmt.schema)
            for path, expr in stmt.assigns:
                evaluated = _eval_expr(expr, result, ctx)
                _assign_into(value, path, evaluated, stmt.schema, ctx)
            result.forwards.append((stmt.topic, value, stmt.schema))
        elif isinstance(stmt, If):
            branch = stmt.then if _truthy(_eval_expr(stmt.cond, result, ctx)) else stmt.orelse
            if _run_program(branch, result, ctx) is _DROPPED:
                return _DROPPED
        else:  # pragma: no cover
            raise _Abort(StageTypeError(f"unhandled statement {stmt!r}"))
    return None


def _forward_entry(topic, result):
    if isinstance(result.working, RawPayload):
        return (topic, result.working.data, result.working_schema)
    if result.working is None:
        raise _Abort(StageTypeError("nothing to forward: pipeline has no input message"))
    return (topic, copy.deepcopy(result.working), result.working_schema)


def _check_target(ctx, topic):
    if ctx.publications is not None and topic not in ctx.publications:
        raise _Abort(NotPublished(f"forward target {topic} is not among the node's publications"))


def _require_typed(result, stage):
    if isinstance(result.working, RawPayload) or result.working is None:
        raise StageTypeError(
            f"stage {type(stage).__name__} needs a decoded message"
        )
    return result.working


def _eval_expr(expr, result, ctx):
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Str):
        return expr.value
    if isinstance(expr, Bool):
        return expr.value
    if isinstance(expr, ParamRef):
        if ctx.params is None:
            return 0.0
        return ctx.params.get(expr.name)
    if isinstance(expr, MsgPath):
        working = _require_typed(result, expr)
        return _get_path(working, expr.path)
    if isinstance(expr, Unary):
        value = _eval_expr(expr.operand, result, ctx)
        if expr.op == "-":
            return -_to_number(value)
        return not _truthy(value)
    if isinstance(expr, Binary):
        if expr.op == "&&":
            return _truthy(_eval_expr(expr.left, result, ctx)) and _truthy(_eval_expr(expr.right, result, ctx))
        if expr.op == "||":
            return _truthy(_eval_expr(expr.left, result, ctx)) or _truthy(_eval_expr(expr.right, result, ctx))
        left = _eval_expr(expr.left, result, ctx)
        right = _eval_expr(expr.right, result, ctx)
        if expr.op in ("==", "!="):
            equal = left == right
            return equal if expr.op == "==" else not equal
        lnum, rnum = _to_number(left), _to_number(right)
        if expr.op == "+":
            return lnum + rnum
        if expr.op == "-":
            return lnum - rnum
        if expr.op == "*":
            return lnum * rnum
        if expr.op == "/":
            return _ieee_div(lnum, rnum)
        if expr.op == ">":
            return lnum > rnum
        if expr.op == "<":
            return lnum < rnum
        if expr.op == ">=":
            return lnum >= rnum
        if expr.op == "<=":
            return lnum <= rnum
    raise _Abort(StageTypeError(f"cannot evaluate {expr!r}"))


def _ieee_div(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _truthy(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return value != 0
    return bool(value)


def _to_number(value) -> float:
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, (int, float)):
        return float(value)
    raise _Abort(StageTypeError(f"expected a number, got {type(value).__name__}"))


def _get_path(working, path):
    node = working
    for seg in path.split("."):
        try:
            if isinstance(node, dict):
                node = node[seg]
            elif isinstance(node, list):
                node = node[int(seg)]
            else:
                raise KeyError(seg)
        except (KeyError, IndexError, ValueError):
            raise _Abort(BadFieldPath(f"path {path!r} not present in message")) from None
    return node


def _set_path_coerced(result, path, value, ctx):
    _assign_into(result.working, path, value, result.working_schema, ctx)


def _assign_into(target, path, value, schema_name, ctx):
    segments = path.split(".")
    node = target
    for seg in segments[:-1]:
        try:
            node = node[seg] if isinstance(node, dict) else node[int(seg)]
        except (KeyError, IndexError, ValueError, TypeError):
            raise _Abort(BadFieldPath(f"path {path!r} not present in message")) from None
    leaf = segments[-1]
    ftype = None
    if ctx.registry is not None and schema_name and schema_name in ctx.registry:
        try:
            ftype = ctx.registry.type_at(schema_name, path)
        except BadFieldPath as exc:
            raise _Abort(exc) from None
    coerced = _coerce(value, ftype)
    try:
        if isinstance(node, dict):
            if leaf not in node:
                raise KeyError(leaf)
            node[leaf] = coerced
        elif isinstance(node, list):
            node[int(leaf)] = coerced
        else:
            raise KeyError(leaf)
    except (KeyError, IndexError, ValueError):
        raise _Abort(BadFieldPath(f"path {path!r} not present in message")) from None


def _coerce(value, ftype):
    """Coerce an expression result to the declared field type (rounding, saturating)."""
    if ftype is None or not isinstance(ftype, Scalar):
        if isinstance(ftype, (Struct, FixedList, VarList, Ref)):
            raise _Abort(StageTypeError("cannot assign a scalar into a composite field"))
        return float(value) if isinstance(value, bool) is False and isinstance(value, (int, float)) else value
    kind = ftype.kind
    if kind == "str":
        if not isinstance(value, str):
            raise _Abort(StageTypeError("string field needs a string value"))
        return value
    if kind == "bool":
        return _truthy(value)
    number = _to_number(value)
    if kind in ("f64",):
        return number
    if kind == "f32":
        return _struct.unpack("<f", _struct.pack("<f", number))[0]
    # integers: round to nearest, saturate
    if math.isnan(number):
        rounded = 0
    else:
        rounded = round(number)
    lo, hi = {"i32": _I32, "i64": _I64, "u8": (0, 255)}[kind]
    return min(max(rounded, lo), hi)


def _loggable(working):
    if isinstance(working, RawPayload):
        return f"<raw {len(working.data)} bytes>"
    return working


def abort_error(exc):
    """Unwrap the underlying error from an evaluation abort (for counters)."""
    return exc.error if isinstance(exc, _Abort) else exc


EVAL_ABORT = _Abort
