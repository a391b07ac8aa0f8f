"""Textual schema descriptors.

    schema Twist { linear: {x:f64, y:f64, z:f64}, angular: {x:f64, y:f64, z:f64} }

Types: f64 f32 i64 i32 u8 bool str, a schema name (reference), an inline
struct in braces, and array suffixes: T[3] fixed, T[] variable.
"""

from __future__ import annotations

from ..errors import ParseError
from .types import SCALAR_KINDS, FixedList, Ref, Scalar, Schema, Struct, VarList


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(src):
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            col += 1
            i += 1
            continue
        if ch == "#":
            while i < len(src) and src[i] != "\n":
                i += 1
            continue
        if ch in "{}:,[]":
            toks.append(_Tok(ch, ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("ident", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < len(src) and src[j].isdigit():
                j += 1
            toks.append(_Tok("int", src[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, src):
        self.toks = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what=None):
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {what or kind}, got {tok.text!r}", tok.line, tok.col)
        return tok

    def parse_document(self):
        schemas = []
        while self.peek().kind != "eof":
            kw = self.expect("ident", "'schema'")
            if kw.text != "schema":
                raise ParseError("expected 'schema'", kw.line, kw.col)
            name = self.expect("ident", "schema name").text
            root = self.parse_struct()
            schemas.append(Schema(name, root))
        return schemas

    def parse_struct(self):
        self.expect("{")
        fields = []
        while True:
            if self.peek().kind == "}":
                self.next()
                break
            fname = self.expect("ident", "field name").text
            self.expect(":")
            fields.append((fname, self.parse_type()))
            if self.peek().kind == ",":
                self.next()
            elif self.peek().kind != "}":
                tok = self.peek()
                raise ParseError("expected ',' or '}'", tok.line, tok.col)
        return Struct(tuple(fields))

    def parse_type(self):
        tok = self.peek()
        if tok.kind == "{":
            base = self.parse_struct()
        elif tok.kind == "ident":
            self.next()
            base = Scalar(tok.text) if tok.text in SCALAR_KINDS else Ref(tok.text)
        else:
            raise ParseError("expected a type", tok.line, tok.col)
        while self.peek().kind == "[":
            self.next()
            if self.peek().kind == "int":
                n = int(self.next().text)
                self.expect("]")
                base = FixedList(base, n)
            else:
                self.expect("]")
                base = VarList(base)
        return base


def parse_schemas(text: str) -> list:
    """Parse a document of zero or more `schema NAME { ... }` declarations."""
    return _Parser(text).parse_document()


def format_type(ftype) -> str:
    if isinstance(ftype, Scalar):
        return ftype.kind
    if isinstance(ftype, Ref):
        return ftype.schema
    if isinstance(ftype, FixedList):
        return f"{format_type(ftype.elem)}[{ftype.length}]"
    if isinstance(ftype, VarList):
        return f"{format_type(ftype.elem)}[]"
    if isinstance(ftype, Struct):
        inner = ", ".join(f"{n}:{format_type(t)}" for n, t in ftype.fields)
        return "{" + inner + "}"
    raise TypeError(f"not a field type: {ftype!r}")


def format_schema(schema: Schema) -> str:
    inner = ", ".join(f"{n}:{format_type(t)}" for n, t in schema.fields)
    return f"schema {schema.name} {{ {inner} }}"
