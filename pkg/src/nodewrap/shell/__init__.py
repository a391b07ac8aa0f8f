from .api import DEFAULT_CONTROL_PORT, ControlApiServer
from .grammar import HELP_TEXT, parse_command
from .hub import Hub
from .model import (
    document_from_json,
    document_to_json,
    export_document,
    import_document,
    spec_signature,
)
from .repl import ReplSession

__all__ = [
    "ControlApiServer",
    "DEFAULT_CONTROL_PORT",
    "HELP_TEXT",
    "Hub",
    "ReplSession",
    "document_from_json",
    "document_to_json",
    "export_document",
    "import_document",
    "parse_command",
    "spec_signature",
]
