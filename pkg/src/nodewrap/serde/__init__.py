from .builtins import BUILTIN_SCHEMAS, builtin_registry, twist
from .codec import decode, encode, fixed_size
from .registry import RAW, SchemaRegistry
from .text import format_schema, format_type, parse_schemas
from .types import (
    FixedList,
    Ref,
    Scalar,
    Schema,
    Struct,
    VarList,
    check_identifier,
    struct,
    type_at_path,
    zero_value,
)

__all__ = [
    "BUILTIN_SCHEMAS",
    "FixedList",
    "RAW",
    "Ref",
    "Scalar",
    "Schema",
    "SchemaRegistry",
    "Struct",
    "VarList",
    "builtin_registry",
    "check_identifier",
    "decode",
    "encode",
    "fixed_size",
    "format_schema",
    "format_type",
    "parse_schemas",
    "struct",
    "twist",
    "type_at_path",
    "zero_value",
]
