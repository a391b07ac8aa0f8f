"""Exception hierarchy shared across the package, plus wire error codes.

Every error that can cross the broker's TCP protocol carries a stable u16
code so the remote side can re-raise the matching class.
"""

from __future__ import annotations


class NodewrapError(Exception):
    """Base class for all errors raised by this package."""

    code = 1  # generic


# --- schema / serialization ------------------------------------------------

class DuplicateNameConflict(NodewrapError):
    code = 10


class UnresolvedReference(NodewrapError):
    code = 11


class CyclicSchema(NodewrapError):
    code = 12


class ShapeMismatch(NodewrapError):
    code = 13


class Truncated(NodewrapError):
    code = 14


class TrailingBytes(NodewrapError):
    code = 15


class MalformedString(NodewrapError):
    code = 16


class MalformedLength(NodewrapError):
    code = 17


class NoSuchSchema(NodewrapError):
    code = 18


# --- bus -------------------------------------------------------------------

class InvalidTopic(NodewrapError):
    code = 20


class SchemaConflict(NodewrapError):
    code = 21


class StaleHandle(NodewrapError):
    code = 22


class NoSuchNode(NodewrapError):
    code = 23


class AliasCollision(NodewrapError):
    code = 24


class ReservedPrefix(NodewrapError):
    code = 25


class NameInUse(NodewrapError):
    code = 26


class NotAdmin(NodewrapError):
    code = 27


class ProtocolError(NodewrapError):
    code = 28


class BrokerUnreachable(NodewrapError):
    code = 29


class NoSuchTopic(NodewrapError):
    code = 30


# --- pipeline DSL ----------------------------------------------------------

class ParseError(NodewrapError):
    """Syntax error with position info; str(err) includes line:col."""

    code = 40

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, col {col})"
        super().__init__(message)


class UnknownStageKind(ParseError):
    code = 41


class BadFieldPath(NodewrapError):
    code = 42


class UnknownPipeline(NodewrapError):
    code = 43


class StageTypeError(NodewrapError):
    code = 44


class NoEmit(NodewrapError):
    code = 45


class InvalidIdentifier(NodewrapError):
    code = 46


class NonPositivePeriod(NodewrapError):
    code = 47


# --- node runtime / wrap ---------------------------------------------------

class NotPublished(NodewrapError):
    code = 50


class OverlappingSets(NodewrapError):
    code = 51


class MissingBase(NodewrapError):
    code = 52


class NodeStopped(NodewrapError):
    code = 53


# --- launcher ---------------------------------------------------------------

class NoSuchPackage(NodewrapError):
    code = 60


class NoSuchPackageNode(NodewrapError):
    code = 61


class SpawnFailure(NodewrapError):
    code = 62


class LaunchFailure(NodewrapError):
    code = 63


# --- shell / model ----------------------------------------------------------

class VersionUnsupported(NodewrapError):
    code = 70


class ValidationError(NodewrapError):
    code = 71


class AssertionFailure(NodewrapError):
    code = 72


_BY_CODE = {}
for _name, _obj in list(globals().items()):
    if isinstance(_obj, type) and issubclass(_obj, NodewrapError):
        _BY_CODE.setdefault(_obj.code, _obj)


def error_for_code(code: int, message: str) -> NodewrapError:
    """Rebuild the error class matching a wire error code."""
    cls = _BY_CODE.get(code, NodewrapError)
    if cls is ParseError or cls is UnknownStageKind:
        return cls(message)
    return cls(message)
