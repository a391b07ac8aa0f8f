"""The control hub: one serialized executor for every mutation and query,
whether it arrives from the interactive shell or the WebSocket control API.

All commands are (op, args) pairs; the REPL translates its grammar into the
same pairs the API accepts, so a session driven either way converges to the
same broker state. The hub also owns event fan-out: graph-changed (debounced,
with a polling backstop for out-of-band changes), param-changed,
process-exited and rate-limited message samples.
"""

from __future__ import annotations

import base64
import logging
import threading
import time

from ..errors import (
    NodewrapError,
    NoSuchNode,
    NoSuchTopic,
    ValidationError,
)
from ..pipeline import EvalContext, evaluate, parse_pipeline
from ..pipeline.parser import _Parser, format_named_pipeline
from ..runtime import Runtime
from ..runtime.node import Node
from . import model as model_mod

log = logging.getLogger(__name__)

GRAPH_DEBOUNCE = 0.1
GRAPH_POLL = 0.25
DEFAULT_SAMPLE_RATE = 10.0


def parse_message_literal(text: str):
    """`Twist{linear.x := 2.0, angular.z := 1.8}` -> (schema, assigns)."""
    parser = _Parser(text)
    schema = parser.eat_ident().text
    assigns = parser.parse_emit_assigns() if parser.at_punct("{") else ()
    parser.expect_eof()
    return schema, assigns


class _SampleSub:
    def __init__(self, sub_id, topic, rate, client):
        self.id = sub_id
        self.topic = topic
        self.min_interval = (1.0 / rate) if rate else 0.0
        self.client = client
        self.last_emit = 0.0
        self.dropped = 0


class Hub:
    def __init__(self, runtime: Runtime):
        self.runtime = runtime
        self.declared: dict[str, Node] = {}
        self._lock = threading.RLock()
        self._event_sinks = []
        self._samples: dict[int, _SampleSub] = {}
        self._sample_ids = 0
        self._tool = None
        self._graph_dirty = threading.Event()
        self._stop = threading.Event()
        self._last_graph_version = None
        self._graph_thread = threading.Thread(target=self._graph_loop, name="hub-graph", daemon=True)
        self._graph_thread.start()
        runtime.params.on_change(self._on_param_change)
        runtime.on_process_exit(self._on_process_exit)

    # ------------------------------------------------------------- lifecycle

    def close(self):
        self._stop.set()
        self._graph_dirty.set()
        for sample in list(self._samples.values()):
            sample.client.close()
        self._samples.clear()
        with self._lock:
            if self._tool is not None:
                self._tool.close()
                self._tool = None
        self.runtime.stop_all()

    # ---------------------------------------------------------------- events

    def add_event_sink(self, sink) -> None:
        """sink(event_dict); must be quick and never raise."""
        self._event_sinks.append(sink)

    def remove_event_sink(self, sink) -> None:
        try:
            self._event_sinks.remove(sink)
        except ValueError:
            pass

    def _emit(self, event: dict) -> None:
        for sink in list(self._event_sinks):
            try:
                sink(event)
            except Exception:  # pragma: no cover
                log.exception("event sink failed")

    def _on_param_change(self, name, value, version):
        self._emit({"event": "param-changed", "name": name, "value": value, "version": version})

    def _on_process_exit(self, handle):
        self._emit({"event": "process-exited", "node": handle.node_name,
                    "returncode": handle.returncode, "state": handle.state})
        self._graph_dirty.set()

    def _graph_loop(self):
        while not self._stop.is_set():
            fired = self._graph_dirty.wait(timeout=GRAPH_POLL)
            if self._stop.is_set():
                return
            if fired:
                self._graph_dirty.clear()
                time.sleep(GRAPH_DEBOUNCE)  # coalesce bursts
                self._graph_dirty.clear()
            try:
                snap = self.runtime.snapshot()
            except NodewrapError:
                continue
            if snap.get("version") != self._last_graph_version:
                self._last_graph_version = snap.get("version")
                if fired or self._last_graph_version is not None:
                    self._emit({"event": "graph-changed", "graph": snap})

    def _touch_graph(self):
        self._graph_dirty.set()

    # ------------------------------------------------------------- execution

    def execute(self, op: str, args: dict | None = None) -> dict:
        """Run one command; returns a JSON-able result dict or raises NodewrapError."""
        args = args or {}
        handler = getattr(self, "_op_" + op.replace(".", "_").replace("-", "_"), None)
        if handler is None:
            raise ValidationError(f"unknown op {op!r}")
        with self._lock:
            return handler(args)

    # -- node lifecycle ------------------------------------------------------

    def _builder(self, name) -> Node:
        builder = self.declared.get(name)
        if builder is None:
            raise NoSuchNode(f"no declared node {name!r} (use node.declare first)")
        return builder

    def _node_or_builder(self, name):
        running = self.runtime.nodes.get(name)
        if running is not None:
            return running
        return self._builder(name)

    def _op_node_declare(self, args):
        name = args["name"]
        if name in self.runtime.nodes:
            return {"name": name, "state": "running"}  # selecting a running node
        if name not in self.declared:
            self.declared[name] = Node(name, runtime=self.runtime)
        return {"name": name, "state": "declared"}

    def _op_node_base(self, args):
        builder = self._builder(args["node"])
        builder.base(args["package"], args["base_node"])
        if args.get("args"):
            builder.base_args(*args["args"])
        return {}

    def _op_node_endpoint_add(self, args):
        target = self._node_or_builder(args["node"])
        set_name = args["set"]
        direction = args["direction"]
        topic = args["topic"]
        schema = args.get("schema")
        pipeline = args.get("pipeline")
        if direction == "publish":
            endpoint_id = target._add_publication(set_name, _norm(topic), schema, pipeline)
        else:
            endpoint_id = target._add_subscription(set_name, _norm(topic), schema, pipeline, None)
        self._touch_graph()
        return {"endpoint": endpoint_id}

    def _op_node_endpoint_remove(self, args):
        target = self._node_or_builder(args["node"])
        target.remove_endpoint(args["set"], args["direction"], args["topic"])
        self._touch_graph()
        return {}

    def _op_node_replace(self, args):
        self._builder(args["node"]).replace(args["from"], args["to"], args["pipeline"])
        return {}

    def _op_node_timer_add(self, args):
        target = self._node_or_builder(args["node"])
        timer_id = target.add_timer(float(args["period"]), args.get("pipeline"))
        return {"timer": timer_id}

    def _op_node_timer_remove(self, args):
        target = self._node_or_builder(args["node"])
        target.remove_timer(int(args["timer"]))
        return {}

    def _op_node_create(self, args):
        name = args["node"]
        builder = self._builder(name)
        running = builder.create()
        del self.declared[name]
        self._touch_graph()
        return {"name": name, "state": running.state}

    def _op_node_stop(self, args):
        name = args["node"]
        node = self.runtime.nodes.get(name)
        if node is None:
            handle = self.runtime.launcher.find(name)
            if handle is None:
                raise NoSuchNode(f"no running node {name!r}")
            rc = self.runtime.launcher.stop(handle, grace=float(args.get("grace", 2.0)))
            self._touch_graph()
            return {"returncode": rc, "state": handle.state}
        node.stop(stop_base=bool(args.get("stop_base", True)))
        self._touch_graph()
        return {"state": "stopped"}

    def _op_node_unwrap(self, args):
        node = self.runtime.get_node(args["node"])
        node.unwrap()
        self._touch_graph()
        return {}

    def _op_node_write(self, args):
        node = self.runtime.get_node(args["node"])
        value = self._literal_or_value(args)
        node.write(args["topic"], value)
        return {}

    def _op_node_list(self, args):
        names = {}
        for name in self.declared:
            names[name] = "declared"
        for name, node in self.runtime.nodes.items():
            names[name] = node.state
        for n in self.runtime.snapshot()["nodes"]:
            names.setdefault(n["name"], "connected")
        return {"nodes": [{"name": k, "state": names[k]} for k in sorted(names)]}

    def _op_node_info(self, args):
        name = args["node"]
        snap = self.runtime.snapshot()
        entry = next((n for n in snap["nodes"] if n["name"] == name), None)
        info = {"name": name}
        if name in self.declared:
            info["state"] = "declared"
            info["spec"] = model_mod.export_node(self.declared[name].spec,
                                                 self.runtime.pipelines, self.runtime.registry)
        running = self.runtime.nodes.get(name)
        if running is not None:
            info["state"] = running.state
            info["handlers"] = running.endpoint_stats()
            info["timers"] = running.timer_stats()
            info["wiring"] = running.wiring()
        if entry is not None:
            info.setdefault("state", "connected")
            info["publications"] = entry["publications"]
            info["subscriptions"] = entry["subscriptions"]
            info["pid"] = entry["pid"]
            info["aliases"] = [a for a in snap["aliases"] if a["node"] == name]
        if len(info) == 1:
            raise NoSuchNode(f"no node {name!r}")
        return info

    def _op_node_log(self, args):
        handle = self.runtime.launcher.find(args["node"])
        if handle is None:
            raise NoSuchNode(f"no launched process for node {args['node']!r}")
        return {"node": args["node"], "state": handle.state, "pid": handle.pid,
                "log": handle.log_text()}

    # -- pipelines / params -----------------------------------------------------

    def _op_pipeline_define(self, args):
        text = args["text"].strip()
        if text.startswith("pipeline"):
            from ..pipeline import parse_named_pipeline

            spec = parse_named_pipeline(text)
        else:
            spec = parse_pipeline(text, args["name"])
        self.runtime.pipelines.define(spec)
        return {"name": spec.name}

    def _op_pipeline_get(self, args):
        spec = self.runtime.pipelines.get(args["name"])
        return {"name": spec.name, "text": format_named_pipeline(spec)}

    def _op_pipeline_list(self, args):
        return {"pipelines": self.runtime.pipelines.names()}

    def _op_param_set(self, args):
        version = self.runtime.params.set(args["name"], float(args["value"]))
        return {"name": args["name"], "version": version}

    def _op_param_get(self, args):
        return {"name": args["name"], "value": self.runtime.params.get(args["name"])}

    def _op_param_list(self, args):
        return {"params": self.runtime.params.items()}

    # -- graph / topics -----------------------------------------------------------

    def _op_graph_get(self, args):
        return {"graph": self.runtime.snapshot()}

    def _op_topic_list(self, args):
        return {"topics": self.runtime.snapshot()["topics"]}

    def _op_topic_info(self, args):
        topic = _norm(args["topic"])
        entry = next((t for t in self.runtime.snapshot()["topics"] if t["name"] == topic), None)
        if entry is None:
            raise NoSuchTopic(f"no such topic {topic}")
        return entry

    def _op_topic_pub(self, args):
        value = self._literal_or_value(args)
        schema = args["schema"]
        tool = self._tool_client()
        handle = tool.advertise(args["topic"], schema)
        seq = tool.publish(handle, value)
        return {"seq": seq}

    def _op_topic_subscribe(self, args):
        topic = _norm(args["topic"])
        rate = args.get("rate", DEFAULT_SAMPLE_RATE)
        rate = float(rate) if rate is not None else 0.0
        meta_only = bool(args.get("meta", False))
        self._sample_ids += 1
        sub_id = self._sample_ids
        client = self.runtime.observer(f"nw_sample_{sub_id}")
        sample = _SampleSub(sub_id, topic, rate, client)

        def on_message(incoming):
            now = time.monotonic()
            if sample.min_interval and now - sample.last_emit < sample.min_interval:
                sample.dropped += 1
                return
            sample.last_emit = now
            event = {"event": "message-sample", "sub": sub_id, "topic": incoming.topic,
                     "schema": incoming.schema, "seq": incoming.seq, "ts": incoming.ts_ns,
                     "origin": list(incoming.origin) if incoming.origin else None}
            if not meta_only:
                if incoming.can_decode():
                    event["value"] = incoming.value()
                else:
                    event["payload_b64"] = base64.b64encode(incoming.bytes()).decode()
            self._emit(event)

        client.subscribe(topic, None, on_message)
        self._samples[sub_id] = sample
        self._touch_graph()
        return {"sub": sub_id}

    def _op_topic_unsubscribe(self, args):
        sample = self._samples.pop(int(args["sub"]), None)
        if sample is not None:
            sample.client.close()
            self._touch_graph()
        return {}

    # -- models ------------------------------------------------------------------

    def _spec_of(self, name):
        if name in self.declared:
            return self.declared[name].spec
        running = self.runtime.nodes.get(name)
        if running is not None:
            return running.spec
        raise NoSuchNode(f"no node {name!r}")

    def _op_model_export(self, args):
        spec = self._spec_of(args["node"])
        doc = model_mod.export_document([spec], self.runtime.pipelines, self.runtime.registry)
        return {"document": doc}

    def _op_model_import(self, args):
        builders = model_mod.import_document(args["document"], self.runtime.pipelines,
                                             self.runtime.registry)
        names = []
        for builder in builders:
            if builder.name in self.runtime.nodes:
                raise ValidationError(f"node {builder.name!r} is already running")
            builder.runtime = self.runtime
            self.declared[builder.name] = builder
            names.append(builder.name)
        return {"nodes": names}

    # -- processes ------------------------------------------------------------------

    def _op_process_run(self, args):
        handle = self.runtime.launcher.spawn(
            args["package"], args["pkg_node"],
            node_name=args.get("name"),
            extra_args=tuple(args.get("args", ())),
        )
        self._touch_graph()
        return {"node": handle.node_name, "pid": handle.pid}

    def _op_process_stop(self, args):
        handle = self.runtime.launcher.find(args["name"])
        if handle is None:
            raise NoSuchNode(f"no launched process for {args['name']!r}")
        rc = self.runtime.launcher.stop(handle, grace=float(args.get("grace", 2.0)))
        self._touch_graph()
        return {"returncode": rc, "state": handle.state}

    def _op_help(self, args):
        from .grammar import HELP_TEXT

        return {"help": HELP_TEXT}

    # -- shared helpers ---------------------------------------------------------------

    def _tool_client(self):
        if self._tool is None:
            import os

            self._tool = self.runtime.observer(f"nw_shell_{os.getpid()}")
        return self._tool

    def _literal_or_value(self, args):
        if "value" in args and isinstance(args["value"], dict):
            return args["value"]
        literal = args.get("literal")
        if literal is None:
            raise ValidationError("need a message value or literal")
        schema, assigns = parse_message_literal(literal)
        args.setdefault("schema", schema)
        if schema != args["schema"]:
            raise ValidationError(f"literal schema {schema} does not match {args['schema']}")
        return self.literal_value(schema, assigns)

    def literal_value(self, schema, assigns):
        """Build a message from `Schema{path := expr}` assignments."""
        registry = self.runtime.registry
        value = registry.zero(schema)
        if assigns:
            from ..pipeline.ast import Emit, ExprStage, PipelineSpec

            stage = ExprStage((Emit(schema, tuple(assigns), "/__literal__"),))
            ctx = EvalContext(params=self.runtime.params, registry=registry, publications=None)
            result = evaluate(PipelineSpec("literal", (stage,)), None, ctx)
            value = result.forwards[0][1]
        return value


def _norm(topic):
    from ..bus.topics import normalize_topic

    return normalize_topic(topic)
