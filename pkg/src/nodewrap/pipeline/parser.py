"""Pipeline text: parser with line/column diagnostics, and the canonical printer.

    relay to /mobile_base/commands/velocity
    clamp linear.x -5 5
    expr {
      if msg.linear.x > 0 { msg.linear.x := param("speed") };
      forward("/mobile_base/commands/velocity")
    }

parse -> print -> parse is a fixed point.
"""

from __future__ import annotations

from ..errors import ParseError, UnknownStageKind
from ..serde.types import check_identifier
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

STAGE_KINDS = ("relay", "clamp", "scale", "gate", "drop", "log", "expr")

_PUNCT2 = (":=", ">=", "<=", "==", "!=", "&&", "||")
_PUNCT1 = "{}(),;/.><+-*!="


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):  # pragma: no cover - debug aid
        return f"<{self.kind} {self.text!r} @{self.line}:{self.col}>"


def _tokenize(src):
    toks = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        ch = src[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if src[i:i + 2] in _PUNCT2:
            toks.append(_Tok("punct", src[i:i + 2], line, col))
            i += 2
            col += 2
            continue
        if ch == '"':
            j = i + 1
            buf = []
            while j < n and src[j] != '"':
                if src[j] == "\\" and j + 1 < n:
                    esc = src[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                else:
                    buf.append(src[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            toks.append(_Tok("string", "".join(buf), line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit():
            # digits, at most one dot (only when followed by a digit, so that
            # list-index paths like transforms.0.x keep their dots), optional exponent
            j = i
            seen_dot = False
            while j < n:
                c = src[j]
                if c.isdigit():
                    j += 1
                elif c == "." and not seen_dot and j + 1 < n and src[j + 1].isdigit():
                    seen_dot = True
                    j += 1
                elif c in "eE" and j + 1 < n and (
                    src[j + 1].isdigit()
                    or (src[j + 1] in "+-" and j + 2 < n and src[j + 2].isdigit())
                ):
                    j += 2 if src[j + 1] in "+-" else 1
                    while j < n and src[j].isdigit():
                        j += 1
                    break
                else:
                    break
            text = src[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"bad number {text!r}", line, col) from None
            toks.append(_Tok("number", text, line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("ident", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in _PUNCT1:
            toks.append(_Tok("punct", ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, src):
        self.toks = _tokenize(src)
        self.pos = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead=0):
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self):
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at_punct(self, text):
        tok = self.peek()
        return tok.kind == "punct" and tok.text == text

    def eat_punct(self, text):
        if self.at_punct(text):
            return self.next()
        tok = self.peek()
        raise ParseError(f"expected {text!r}, got {tok.text!r}", tok.line, tok.col)

    def eat_ident(self, expected=None):
        tok = self.next()
        if tok.kind != "ident" or (expected is not None and tok.text != expected):
            raise ParseError(f"expected {expected or 'identifier'}, got {tok.text!r}", tok.line, tok.col)
        return tok

    # -- stage level ----------------------------------------------------------

    def parse_stages(self, *, stop_at_brace=False):
        stages = []
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                if stop_at_brace:
                    raise ParseError("missing closing '}'", tok.line, tok.col)
                break
            if stop_at_brace and self.at_punct("}"):
                self.next()
                break
            stages.append(self.parse_stage())
        return tuple(stages)

    def parse_stage(self):
        tok = self.peek()
        if tok.kind != "ident":
            raise ParseError(f"expected a stage, got {tok.text!r}", tok.line, tok.col)
        if tok.text not in STAGE_KINDS:
            raise UnknownStageKind(f"unknown stage kind {tok.text!r}", tok.line, tok.col)
        self.next()
        if tok.text == "relay":
            self.eat_ident("to")
            return Relay(self.parse_topic())
        if tok.text == "clamp":
            return Clamp(self.parse_rel_path(), self.parse_signed_number(), self.parse_signed_number())
        if tok.text == "scale":
            return Scale(self.parse_rel_path(), self.parse_signed_number())
        if tok.text == "gate":
            return Gate(self.parse_expr())
        if tok.text == "drop":
            return Drop()
        if tok.text == "log":
            stok = self.next()
            if stok.kind != "string":
                raise ParseError("log needs a quoted label", stok.line, stok.col)
            return Log(stok.text)
        # expr
        self.eat_punct("{")
        program = self.parse_program()
        self.eat_punct("}")
        return ExprStage(program)

    # -- program level ---------------------------------------------------------

    def parse_program(self):
        stmts = []
        while not self.at_punct("}") and self.peek().kind != "eof":
            stmts.append(self.parse_stmt())
            if self.at_punct(";"):
                self.next()
            else:
                break
        return tuple(stmts)

    def parse_block(self):
        self.eat_punct("{")
        stmts = self.parse_program()
        self.eat_punct("}")
        return stmts

    def parse_stmt(self):
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "if":
            self.next()
            cond = self.parse_expr()
            then = self.parse_block()
            orelse = ()
            if self.peek().kind == "ident" and self.peek().text == "else":
                self.next()
                orelse = self.parse_block()
            return If(cond, then, orelse)
        if tok.kind == "ident" and tok.text == "drop":
            self.next()
            return DropStmt()
        if tok.kind == "ident" and tok.text == "forward":
            self.next()
            self.eat_punct("(")
            topic = self.parse_topic(allow_string=True)
            self.eat_punct(")")
            return Forward(topic)
        if tok.kind == "ident" and tok.text == "emit":
            self.next()
            schema = self.eat_ident().text
            assigns = self.parse_emit_assigns()
            self.eat_ident("to")
            return Emit(schema, assigns, self.parse_topic(allow_string=True))
        # assignment: msg.PATH := expr
        path = self.parse_msg_path()
        self.eat_punct(":=")
        return Assign(path, self.parse_expr())

    def parse_emit_assigns(self):
        self.eat_punct("{")
        assigns = []
        while not self.at_punct("}"):
            path = self.parse_rel_path()
            self.eat_punct(":=")
            assigns.append((path, self.parse_expr()))
            if self.at_punct(","):
                self.next()
            elif not self.at_punct("}"):
                tok = self.peek()
                raise ParseError("expected ',' or '}'", tok.line, tok.col)
        self.next()
        return tuple(assigns)

    # -- expressions -------------------------------------------------------------

    def parse_expr(self):
        return self.parse_or()

    def parse_or(self):
        left = self.parse_and()
        while self.at_punct("||"):
            self.next()
            left = Binary("||", left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_cmp()
        while self.at_punct("&&"):
            self.next()
            left = Binary("&&", left, self.parse_cmp())
        return left

    def parse_cmp(self):
        left = self.parse_add()
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text in (">", "<", ">=", "<=", "==", "!="):
                self.next()
                left = Binary(tok.text, left, self.parse_add())
            else:
                return left

    def parse_add(self):
        left = self.parse_mul()
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text in ("+", "-"):
                self.next()
                left = Binary(tok.text, left, self.parse_mul())
            else:
                return left

    def parse_mul(self):
        left = self.parse_unary()
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text in ("*", "/"):
                self.next()
                left = Binary(tok.text, left, self.parse_unary())
            else:
                return left

    def parse_unary(self):
        tok = self.peek()
        if tok.kind == "punct" and tok.text in ("-", "!"):
            self.next()
            return Unary(tok.text, self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            return Num(float(tok.text))
        if tok.kind == "string":
            self.next()
            return Str(tok.text)
        if self.at_punct("("):
            self.next()
            inner = self.parse_expr()
            self.eat_punct(")")
            return inner
        if tok.kind == "ident":
            if tok.text == "true":
                self.next()
                return Bool(True)
            if tok.text == "false":
                self.next()
                return Bool(False)
            if tok.text == "param":
                self.next()
                self.eat_punct("(")
                name_tok = self.next()
                if name_tok.kind != "string":
                    raise ParseError('param() takes a quoted name', name_tok.line, name_tok.col)
                self.eat_punct(")")
                return ParamRef(name_tok.text)
            if tok.text == "msg":
                return MsgPath(self.parse_msg_path())
            raise ParseError(f"unknown function or name {tok.text!r}", tok.line, tok.col)
        raise ParseError(f"expected an expression, got {tok.text!r}", tok.line, tok.col)

    # -- paths and topics -----------------------------------------------------------

    def parse_msg_path(self):
        self.eat_ident("msg")
        parts = []
        while self.at_punct("."):
            self.next()
            tok = self.next()
            if tok.kind not in ("ident", "number") or (tok.kind == "number" and not tok.text.isdigit()):
                raise ParseError("bad path segment", tok.line, tok.col)
            parts.append(tok.text)
        if not parts:
            tok = self.peek()
            raise ParseError("expected '.field' after msg", tok.line, tok.col)
        return ".".join(parts)

    def parse_rel_path(self):
        tok = self.next()
        if tok.kind != "ident":
            raise ParseError("expected a field path", tok.line, tok.col)
        parts = [tok.text]
        while self.at_punct("."):
            self.next()
            nxt = self.next()
            if nxt.kind not in ("ident", "number") or (nxt.kind == "number" and not nxt.text.isdigit()):
                raise ParseError("bad path segment", nxt.line, nxt.col)
            parts.append(nxt.text)
        return ".".join(parts)

    def parse_signed_number(self):
        neg = False
        while self.at_punct("-"):
            self.next()
            neg = not neg
        tok = self.next()
        if tok.kind != "number":
            raise ParseError("expected a number", tok.line, tok.col)
        val = float(tok.text)
        return -val if neg else val

    def parse_topic(self, *, allow_string=False):
        tok = self.peek()
        if allow_string and tok.kind == "string":
            self.next()
            return tok.text
        parts = []
        if self.at_punct("/"):
            self.next()
        segment = self.next()
        if segment.kind != "ident":
            raise ParseError("expected a topic", segment.line, segment.col)
        parts.append(segment.text)
        while self.at_punct("/"):
            self.next()
            nxt = self.next()
            if nxt.kind not in ("ident", "number"):
                raise ParseError("bad topic segment", nxt.line, nxt.col)
            parts.append(nxt.text)
        return "/" + "/".join(parts)

    def expect_eof(self):
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)


def parse_pipeline(text: str, name: str = "anonymous") -> PipelineSpec:
    """Parse a bare stage sequence ('' is the empty identity-sink pipeline)."""
    parser = _Parser(text)
    stages = parser.parse_stages()
    parser.expect_eof()
    return PipelineSpec(name, stages)


def parse_named_pipeline(text: str) -> PipelineSpec:
    """Parse the full `pipeline NAME { stages }` form."""
    parser = _Parser(text)
    parser.eat_ident("pipeline")
    name = parser.eat_ident().text
    check_identifier(name, "pipeline name")
    parser.eat_punct("{")
    stages = parser.parse_stages(stop_at_brace=True)
    parser.expect_eof()
    return PipelineSpec(name, stages)


# --- canonical printing -------------------------------------------------------


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_expr(expr, parent_prec=0) -> str:
    prec = {"||": 1, "&&": 2, ">": 3, "<": 3, ">=": 3, "<=": 3, "==": 3, "!=": 3,
            "+": 4, "-": 4, "*": 5, "/": 5}
    if isinstance(expr, Num):
        return _fmt_num(expr.value)
    if isinstance(expr, Str):
        escaped = expr.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(expr, Bool):
        return "true" if expr.value else "false"
    if isinstance(expr, MsgPath):
        return f"msg.{expr.path}"
    if isinstance(expr, ParamRef):
        return f'param("{expr.name}")'
    if isinstance(expr, Unary):
        return f"{expr.op}{format_expr(expr.operand, 6)}"
    if isinstance(expr, Binary):
        p = prec[expr.op]
        text = f"{format_expr(expr.left, p)} {expr.op} {format_expr(expr.right, p + 1)}"
        return f"({text})" if p < parent_prec else text
    raise TypeError(f"not an expression: {expr!r}")


def _format_stmt(stmt) -> str:
    if isinstance(stmt, Assign):
        return f"msg.{stmt.path} := {format_expr(stmt.expr)}"
    if isinstance(stmt, DropStmt):
        return "drop"
    if isinstance(stmt, Forward):
        return f'forward("{stmt.topic}")'
    if isinstance(stmt, Emit):
        inner = ", ".join(f"{p} := {format_expr(e)}" for p, e in stmt.assigns)
        return f"emit {stmt.schema} {{{inner}}} to {stmt.topic}"
    if isinstance(stmt, If):
        text = f"if {format_expr(stmt.cond)} {{ {_format_program(stmt.then)} }}"
        if stmt.orelse:
            text += f" else {{ {_format_program(stmt.orelse)} }}"
        return text
    raise TypeError(f"not a statement: {stmt!r}")


def _format_program(stmts) -> str:
    return "; ".join(_format_stmt(s) for s in stmts)


def format_stage(stage) -> str:
    if isinstance(stage, Relay):
        return f"relay to {stage.topic}"
    if isinstance(stage, Clamp):
        return f"clamp {stage.path} {_fmt_num(stage.lo)} {_fmt_num(stage.hi)}"
    if isinstance(stage, Scale):
        return f"scale {stage.path} {_fmt_num(stage.factor)}"
    if isinstance(stage, Gate):
        return f"gate {format_expr(stage.cond)}"
    if isinstance(stage, Drop):
        return "drop"
    if isinstance(stage, Log):
        escaped = stage.label.replace("\\", "\\\\").replace('"', '\\"')
        return f'log "{escaped}"'
    if isinstance(stage, ExprStage):
        return f"expr {{ {_format_program(stage.program)} }}"
    raise TypeError(f"not a stage: {stage!r}")


def format_pipeline(spec: PipelineSpec) -> str:
    """Bare canonical stage text (one stage per line)."""
    return "\n".join(format_stage(s) for s in spec.stages)


def format_named_pipeline(spec: PipelineSpec) -> str:
    body = "".join(f"  {format_stage(s)}\n" for s in spec.stages)
    return f"pipeline {spec.name} {{\n{body}}}"
