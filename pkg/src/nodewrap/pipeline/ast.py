"""Pipeline AST: immutable stage and expression nodes.

A pipeline is an ordered stage list. Specs are frozen after parse; hot
swapping installs a whole new spec, never mutates one in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# --- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class MsgPath:
    path: str  # dotted, relative to the message root


@dataclass(frozen=True)
class ParamRef:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "!"
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / > < >= <= == != && ||
    left: object
    right: object


# --- statements --------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    path: str
    expr: object


@dataclass(frozen=True)
class If:
    cond: object
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class DropStmt:
    pass


@dataclass(frozen=True)
class Forward:
    topic: str


@dataclass(frozen=True)
class Emit:
    schema: str
    assigns: tuple  # of (path, expr)
    topic: str


# --- stages ------------------------------------------------------------------

@dataclass(frozen=True)
class Relay:
    topic: str


@dataclass(frozen=True)
class Clamp:
    path: str
    lo: float
    hi: float


@dataclass(frozen=True)
class Scale:
    path: str
    factor: float


@dataclass(frozen=True)
class Gate:
    cond: object


@dataclass(frozen=True)
class Drop:
    pass


@dataclass(frozen=True)
class Log:
    label: str


@dataclass(frozen=True)
class ExprStage:
    program: tuple  # of statements


@dataclass(frozen=True)
class PipelineSpec:
    name: str
    stages: tuple = field(default_factory=tuple)

    @property
    def reads_message(self) -> bool:
        """True when any stage needs the decoded value (drives decode-mode relays)."""
        return any(_stage_reads(stage) for stage in self.stages)

    @property
    def has_emit(self) -> bool:
        return any(
            isinstance(stage, ExprStage) and _program_emits(stage.program)
            for stage in self.stages
        )

    def forward_topics(self) -> set:
        """Every topic this pipeline can forward to (for install-time checks)."""
        out = set()
        for stage in self.stages:
            if isinstance(stage, Relay):
                out.add(stage.topic)
            elif isinstance(stage, ExprStage):
                _program_topics(stage.program, out)
        return out


def _program_emits(stmts) -> bool:
    for stmt in stmts:
        if isinstance(stmt, Emit):
            return True
        if isinstance(stmt, If) and (_program_emits(stmt.then) or _program_emits(stmt.orelse)):
            return True
    return False


def _program_topics(stmts, out) -> None:
    for stmt in stmts:
        if isinstance(stmt, (Forward, Emit)):
            out.add(stmt.topic)
        elif isinstance(stmt, If):
            _program_topics(stmt.then, out)
            _program_topics(stmt.orelse, out)


def _stage_reads(stage) -> bool:
    if isinstance(stage, (Clamp, Scale, Gate)):
        return True
    if isinstance(stage, ExprStage):
        return _program_reads(stage.program)
    return False


def _program_reads(stmts) -> bool:
    for stmt in stmts:
        if isinstance(stmt, Assign):
            return True
        if isinstance(stmt, Forward):
            continue
        if isinstance(stmt, Emit):
            if any(_expr_reads(e) for _, e in stmt.assigns):
                return True
        elif isinstance(stmt, If):
            if _expr_reads(stmt.cond) or _program_reads(stmt.then) or _program_reads(stmt.orelse):
                return True
    return False


def _expr_reads(expr) -> bool:
    if isinstance(expr, MsgPath):
        return True
    if isinstance(expr, Unary):
        return _expr_reads(expr.operand)
    if isinstance(expr, Binary):
        return _expr_reads(expr.left) or _expr_reads(expr.right)
    return False
