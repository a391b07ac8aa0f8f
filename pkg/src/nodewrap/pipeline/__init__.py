from .ast import PipelineSpec
from .eval import (
    EVAL_ABORT,
    EvalContext,
    RawPayload,
    abort_error,
    check_pipeline,
    emit_program,
    eval_pipeline,
    evaluate,
)
from .params import ParameterStore
from .parser import (
    format_named_pipeline,
    format_pipeline,
    parse_named_pipeline,
    parse_pipeline,
)
from .registry import PipelineRegistry

__all__ = [
    "EVAL_ABORT",
    "EvalContext",
    "ParameterStore",
    "PipelineRegistry",
    "PipelineSpec",
    "RawPayload",
    "abort_error",
    "check_pipeline",
    "emit_program",
    "eval_pipeline",
    "evaluate",
    "format_named_pipeline",
    "format_pipeline",
    "parse_named_pipeline",
    "parse_pipeline",
]
