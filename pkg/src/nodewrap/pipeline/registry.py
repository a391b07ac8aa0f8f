"""Named pipeline registry; subscriptions resolve by name at dispatch time,
so redefining a name hot-swaps behavior everywhere it is referenced."""

from __future__ import annotations

import threading

from ..errors import UnknownPipeline
from ..serde.types import check_identifier
from .ast import PipelineSpec
from .parser import format_named_pipeline, parse_named_pipeline, parse_pipeline


class PipelineRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._specs: dict[str, PipelineSpec] = {}

    def define(self, spec: PipelineSpec) -> str:
        check_identifier(spec.name, "pipeline name")
        with self._lock:
            self._specs[spec.name] = spec
        return spec.name

    def define_text(self, text: str) -> str:
        """Full `pipeline NAME { ... }` form."""
        return self.define(parse_named_pipeline(text))

    def define_stages(self, name: str, stage_text: str) -> str:
        return self.define(parse_pipeline(stage_text, name))

    def get(self, name: str) -> PipelineSpec:
        with self._lock:
            spec = self._specs.get(name)
        if spec is None:
            raise UnknownPipeline(f"unknown pipeline {name!r}")
        return spec

    def __contains__(self, name) -> bool:
        with self._lock:
            return name in self._specs

    def names(self) -> list:
        with self._lock:
            return sorted(self._specs)

    def describe(self, name: str) -> str:
        return format_named_pipeline(self.get(name))
