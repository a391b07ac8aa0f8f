"""Model documents: save a node's full declaration as canonical JSON and load
it back. Documents are self-contained: pipeline texts and non-builtin schema
descriptors ride along. Import validates and registers, but never creates."""

from __future__ import annotations

import json

from ..errors import UnknownPipeline, ValidationError, VersionUnsupported
from ..pipeline.parser import format_pipeline, parse_pipeline
from ..runtime.node import Node, NodeSpec
from ..serde import parse_schemas
from ..serde.builtins import builtin_registry
from ..serde.text import format_schema
from ..serde.types import references

MODEL_VERSION = 1

_BUILTIN_NAMES = frozenset(builtin_registry().names())


def spec_signature(spec: NodeSpec) -> tuple:
    """Canonical structural identity of a spec (ids and object wiring ignored)."""
    return (
        spec.name,
        spec.base,
        tuple(spec.base_args),
        tuple(sorted((e.set, e.direction, e.topic, e.schema, e.pipeline)
                     for e in spec.endpoints)),
        tuple(sorted((r.base_topic, r.external, r.pipeline) for r in spec.replaces)),
        tuple(sorted((t.period, t.pipeline) for t in spec.timers)),
        tuple(sorted(spec.params.items())),
    )


def export_node(spec: NodeSpec, pipelines, registry) -> dict:
    """Build the canonical document for one node spec."""
    pipeline_names = set()
    for e in spec.endpoints:
        if e.handler is not None:
            raise ValidationError(
                f"endpoint {e.topic} uses an embedded function handler; only pipeline "
                "handlers can be exported"
            )
        if e.pipeline:
            pipeline_names.add(e.pipeline)
    for r in spec.replaces:
        pipeline_names.add(r.pipeline)
    for t in spec.timers:
        if t.handler is not None:
            raise ValidationError("timers with embedded function handlers cannot be exported")
        if t.pipeline:
            pipeline_names.add(t.pipeline)

    pipeline_texts = {}
    for name in sorted(pipeline_names):
        pipeline_texts[name] = format_pipeline(pipelines.get(name))

    schema_names = set()
    for e in spec.endpoints:
        if e.schema:
            schema_names.add(e.schema)
    schema_texts = {}
    for name in sorted(schema_names):
        if name in _BUILTIN_NAMES or name not in registry:
            continue
        _collect_schema(name, registry, schema_texts)

    base_doc = None
    if spec.base is not None:
        base_doc = {"package": spec.base[0], "node": spec.base[1]}
        if spec.base_args:
            base_doc["args"] = list(spec.base_args)
    return {
        "name": spec.name,
        "base": base_doc,
        "params": {k: spec.params[k] for k in sorted(spec.params)},
        "endpoints": [
            {"set": e.set, "direction": e.direction, "topic": e.topic,
             "schema": e.schema, "pipeline": e.pipeline}
            for e in sorted(spec.endpoints, key=lambda e: (e.set, e.direction, e.topic))
        ],
        "replace": [
            {"from": r.base_topic, "to": r.external, "pipeline": r.pipeline}
            for r in sorted(spec.replaces, key=lambda r: r.base_topic)
        ],
        "timers": [
            {"period": t.period, "pipeline": t.pipeline}
            for t in sorted(spec.timers, key=lambda t: (t.period, t.pipeline or ""))
        ],
        "pipelines": pipeline_texts,
        "schemas": schema_texts,
    }


def _collect_schema(name, registry, out):
    if name in out or name in _BUILTIN_NAMES:
        return
    schema = registry.get(name)
    out[name] = format_schema(schema)
    for ref in sorted(references(schema.root)):
        _collect_schema(ref, registry, out)


def export_document(specs, pipelines, registry) -> dict:
    return {"version": MODEL_VERSION,
            "nodes": [export_node(s, pipelines, registry) for s in specs]}


def document_to_json(document: dict) -> str:
    return json.dumps(document, indent=2) + "\n"


def document_from_json(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc}") from None


def import_document(document: dict, pipelines, registry) -> list:
    """Validate a document and return Node builders (explicit create() still required).

    Embedded pipelines/schemas are registered when absent; an existing name
    with different content is an error, never a silent overwrite.
    """
    if not isinstance(document, dict):
        raise ValidationError("document: expected an object")
    version = document.get("version")
    if version != MODEL_VERSION:
        raise VersionUnsupported(f"document version {version!r}, supported: {MODEL_VERSION}")
    nodes = document.get("nodes")
    if not isinstance(nodes, list):
        raise ValidationError("nodes: expected a list")

    builders = []
    for i, node_doc in enumerate(nodes):
        builders.append(_import_node(node_doc, f"nodes[{i}]", pipelines, registry))
    return builders


_MISSING = object()


def _expect(doc, key, types, path, default=_MISSING):
    value = doc.get(key, default)
    if value is _MISSING:
        raise ValidationError(f"{path}.{key}: missing")
    if value is not None and not isinstance(value, types):
        raise ValidationError(f"{path}.{key}: wrong type {type(value).__name__}")
    return value


def _import_node(doc, path, pipelines, registry) -> Node:
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected an object")
    name = _expect(doc, "name", str, path)

    for schema_name, text in sorted(_expect(doc, "schemas", dict, path, {}).items()):
        try:
            parsed = parse_schemas(text)
        except Exception as exc:
            raise ValidationError(f"{path}.schemas.{schema_name}: {exc}") from None
        if schema_name in registry:
            if registry.get(schema_name) not in parsed:
                raise ValidationError(
                    f"{path}.schemas.{schema_name}: conflicts with an existing schema")
        else:
            registry.define_all(parsed)

    for pname, text in sorted(_expect(doc, "pipelines", dict, path, {}).items()):
        try:
            parsed_spec = parse_pipeline(text, pname)
        except Exception as exc:
            raise ValidationError(f"{path}.pipelines.{pname}: {exc}") from None
        if pname in pipelines:
            if pipelines.get(pname).stages != parsed_spec.stages:
                raise ValidationError(
                    f"{path}.pipelines.{pname}: conflicts with an existing pipeline")
        else:
            pipelines.define(parsed_spec)

    try:
        builder = Node(name)
    except Exception as exc:
        raise ValidationError(f"{path}.name: {exc}") from None

    base = _expect(doc, "base", dict, path, None)
    if base is not None:
        builder.base(_expect(base, "package", str, f"{path}.base"),
                     _expect(base, "node", str, f"{path}.base"))
        base_args = _expect(base, "args", list, f"{path}.base", [])
        if base_args:
            builder.base_args(*base_args)

    for j, ep in enumerate(_expect(doc, "endpoints", list, path, [])):
        ep_path = f"{path}.endpoints[{j}]"
        if not isinstance(ep, dict):
            raise ValidationError(f"{ep_path}: expected an object")
        set_name = _expect(ep, "set", str, ep_path)
        direction = _expect(ep, "direction", str, ep_path)
        if set_name not in ("reuse", "new"):
            raise ValidationError(f"{ep_path}.set: unknown set {set_name!r}")
        if direction not in ("publish", "subscribe"):
            raise ValidationError(f"{ep_path}.direction: unknown direction {direction!r}")
        topic = _expect(ep, "topic", str, ep_path)
        schema = _expect(ep, "schema", str, ep_path, None)
        pipeline_name = _expect(ep, "pipeline", str, ep_path, None)
        if pipeline_name is not None and pipeline_name not in pipelines:
            raise ValidationError(f"{ep_path}.pipeline: unknown pipeline {pipeline_name!r}")
        try:
            if direction == "publish":
                builder._add_publication(set_name, _norm(topic), schema, pipeline_name)
            else:
                builder._add_subscription(set_name, _norm(topic), schema, pipeline_name, None)
        except UnknownPipeline as exc:
            raise ValidationError(f"{ep_path}: {exc}") from None
        except Exception as exc:
            raise ValidationError(f"{ep_path}: {exc}") from None

    for j, rep in enumerate(_expect(doc, "replace", list, path, [])):
        rep_path = f"{path}.replace[{j}]"
        if not isinstance(rep, dict):
            raise ValidationError(f"{rep_path}: expected an object")
        pipeline_name = _expect(rep, "pipeline", str, rep_path)
        if pipeline_name not in pipelines:
            raise ValidationError(f"{rep_path}.pipeline: unknown pipeline {pipeline_name!r}")
        try:
            builder.replace(_expect(rep, "from", str, rep_path),
                            _expect(rep, "to", str, rep_path), pipeline_name)
        except Exception as exc:
            raise ValidationError(f"{rep_path}: {exc}") from None

    for j, timer in enumerate(_expect(doc, "timers", list, path, [])):
        t_path = f"{path}.timers[{j}]"
        if not isinstance(timer, dict):
            raise ValidationError(f"{t_path}: expected an object")
        pipeline_name = _expect(timer, "pipeline", str, t_path)
        if pipeline_name not in pipelines:
            raise ValidationError(f"{t_path}.pipeline: unknown pipeline {pipeline_name!r}")
        try:
            builder.add_timer(float(_expect(timer, "period", (int, float), t_path)), pipeline_name)
        except Exception as exc:
            raise ValidationError(f"{t_path}: {exc}") from None

    for pname, value in sorted(_expect(doc, "params", dict, path, {}).items()):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValidationError(f"{path}.params.{pname}: expected a number")
        builder.param(pname, float(value))

    builder.spec.validate()
    return builder


def _norm(topic):
    from ..bus.topics import normalize_topic

    return normalize_topic(topic)
