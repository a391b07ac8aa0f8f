"""Node abstraction: fluent declaration, create, live reshaping.

    nd = runtime.node("turtle_control_node")
    nd.new.subscribe(topic="/turtle1/pose", schema="Pose", handler=show_pose) \
          .publish(topic="/turtle1/cmd_vel", schema="Twist")
    running = nd.create()

Everything declared on a spec can also be changed on the running node: the
same calls take effect live, and re-declaring an existing subscription swaps
its pipeline atomically between handler invocations — no message is lost,
duplicated or reordered across the swap.
"""

from __future__ import annotations

import copy
import logging
import math
import threading
from dataclasses import dataclass, field, replace

from ..bus.topics import normalize_topic
from ..errors import (
    InvalidIdentifier,
    NodeStopped,
    NodewrapError,
    NoEmit,
    NonPositivePeriod,
    NotPublished,
    SchemaConflict,
    StageTypeError,
    UnknownPipeline,
)
from ..pipeline import EVAL_ABORT, EvalContext, RawPayload, abort_error, check_pipeline, evaluate
from ..serde.types import check_identifier
from .. import wrap as wrap_engine

log = logging.getLogger(__name__)

REUSE = "reuse"
NEW = "new"
PUBLISH = "publish"
SUBSCRIBE = "subscribe"


@dataclass
class Endpoint:
    set: str
    direction: str
    topic: str
    schema: str | None
    pipeline: str | None = None
    handler: object = None
    id: int = 0


@dataclass
class ReplaceEntry:
    base_topic: str
    external: str
    pipeline: str
    id: int = 0


@dataclass
class TimerSpec:
    period: float
    pipeline: str | None = None
    handler: object = None
    id: int = 0


@dataclass
class NodeSpec:
    name: str
    base: tuple | None = None           # (package, node)
    base_args: tuple = ()               # extra argv passed when the base is launched
    endpoints: list = field(default_factory=list)
    replaces: list = field(default_factory=list)
    timers: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def endpoint_for(self, set_name, direction, topic):
        for e in self.endpoints:
            if e.set == set_name and e.direction == direction and e.topic == topic:
                return e
        return None

    def find_direction(self, direction, topic):
        for e in self.endpoints:
            if e.direction == direction and e.topic == topic:
                return e
        return None

    def publish_topics(self) -> set:
        return {e.topic for e in self.endpoints if e.direction == PUBLISH}

    def validate(self) -> None:
        check_identifier(self.name, "node name")
        seen = set()
        for e in self.endpoints:
            key = (e.direction, e.topic)
            if key in seen:
                raise SchemaConflict(f"duplicate endpoint {key} on {self.name}")
            seen.add(key)
        if self.replaces and self.base is None:
            raise NodewrapError(f"replace entries on {self.name} need a base reference")
        for t in self.timers:
            if not (t.period > 0) or math.isnan(t.period):
                raise NonPositivePeriod(f"timer period {t.period!r} must be > 0")

    def clone(self) -> "NodeSpec":
        return NodeSpec(
            self.name,
            self.base,
            tuple(self.base_args),
            [replace(e) for e in self.endpoints],
            [replace(r) for r in self.replaces],
            [replace(t) for t in self.timers],
            dict(self.params),
        )


class _EndpointSet:
    """The `reuse` / `new` chainable endpoint proxy of the fluent builder."""

    def __init__(self, owner, set_name):
        self._owner = owner
        self._set = set_name

    def publish(self, topic=None, schema=None, *, pipeline=None, **kw):
        topic, schema = _endpoint_args(topic, schema, kw)
        self._owner._add_publication(self._set, topic, schema, pipeline)
        return self

    def subscribe(self, topic=None, schema=None, *, pipeline=None, handler=None, **kw):
        topic, schema = _endpoint_args(topic, schema, kw, allow_raw=True)
        self._owner._add_subscription(self._set, topic, schema, pipeline, handler)
        return self


def _endpoint_args(topic, schema, kw, allow_raw=False):
    topic = topic if topic is not None else kw.pop("topic", None)
    schema = schema if schema is not None else kw.pop("type", kw.pop("msgType", None))
    if kw:
        raise TypeError(f"unexpected arguments {sorted(kw)}")
    if topic is None:
        raise InvalidIdentifier("endpoint needs a topic")
    if schema is None and not allow_raw:
        raise InvalidIdentifier(f"publication on {topic} needs a schema")
    return normalize_topic(topic), schema


class Node:
    """Declared (not yet running) node; every mutator returns the builder."""

    def __init__(self, name, runtime=None):
        check_identifier(name, "node name")
        self.spec = NodeSpec(name)
        self.runtime = runtime
        self._ids = 0
        self.reuse = _EndpointSet(self, REUSE)
        self.new = _EndpointSet(self, NEW)

    @property
    def name(self):
        return self.spec.name

    # -- chainable declaration --------------------------------------------

    def base_package(self, package):
        node = self.spec.base[1] if self.spec.base else None
        self.spec.base = (package, node)
        return self

    def base_node(self, node):
        package = self.spec.base[0] if self.spec.base else None
        self.spec.base = (package, node)
        return self

    def base(self, package, node):
        self.spec.base = (package, node)
        return self

    def base_args(self, *args):
        self.spec.base_args = tuple(str(a) for a in args)
        return self

    def replace(self, base_topic, external, pipeline):
        entry = ReplaceEntry(normalize_topic(base_topic), normalize_topic(external), pipeline)
        entry.id = self._next_id()
        self.spec.replaces.append(entry)
        return self

    def timer(self, period, pipeline=None, handler=None):
        self.add_timer(period, pipeline, handler)
        return self

    def add_timer(self, period, pipeline=None, handler=None) -> int:
        period = float(period)
        if not (period > 0) or math.isnan(period):
            raise NonPositivePeriod(f"timer period {period!r} must be > 0")
        if pipeline is None and handler is None:
            raise UnknownPipeline("timer needs a pipeline or a handler")
        spec = TimerSpec(period, pipeline, handler, id=self._next_id())
        self.spec.timers.append(spec)
        return spec.id

    def param(self, name, value):
        check_identifier(name, "parameter name")
        self.spec.params[name] = float(value)
        return self

    # -- endpoint bookkeeping ------------------------------------------------

    def _next_id(self):
        self._ids += 1
        return self._ids

    def _add_publication(self, set_name, topic, schema, pipeline) -> int:
        existing = self.spec.endpoint_for(set_name, PUBLISH, topic)
        if existing is not None:
            if existing.schema != schema:
                raise SchemaConflict(f"{topic} already declared as {existing.schema}")
            existing.pipeline = pipeline if pipeline is not None else existing.pipeline
            return existing.id
        clash = self.spec.find_direction(PUBLISH, topic)
        if clash is not None:
            raise SchemaConflict(f"{topic} already published via the {clash.set} set")
        endpoint = Endpoint(set_name, PUBLISH, topic, schema, pipeline, id=self._next_id())
        self.spec.endpoints.append(endpoint)
        return endpoint.id

    def _add_subscription(self, set_name, topic, schema, pipeline, handler) -> int:
        if set_name == NEW and pipeline is None and handler is None:
            raise UnknownPipeline(f"new.subscribe({topic}) needs a pipeline or handler")
        if pipeline is not None and self.runtime is not None:
            self.runtime.pipelines.get(pipeline)  # UnknownPipeline at declaration time
        existing = self.spec.endpoint_for(set_name, SUBSCRIBE, topic)
        if existing is not None:
            if existing.schema != schema:
                raise SchemaConflict(f"{topic} already subscribed as {existing.schema}")
            existing.pipeline, existing.handler = pipeline, handler
            return existing.id
        clash = self.spec.find_direction(SUBSCRIBE, topic)
        if clash is not None:
            raise SchemaConflict(f"{topic} already subscribed via the {clash.set} set")
        endpoint = Endpoint(set_name, SUBSCRIBE, topic, schema, pipeline, handler, id=self._next_id())
        self.spec.endpoints.append(endpoint)
        return endpoint.id

    def remove_endpoint(self, set_name, direction, topic) -> None:
        topic = normalize_topic(topic)
        endpoint = self.spec.endpoint_for(set_name, direction, topic)
        if endpoint is None:
            raise NotPublished(f"no {set_name} {direction} endpoint on {topic}")
        self.spec.endpoints.remove(endpoint)

    def remove_timer(self, timer_id) -> None:
        self.spec.timers = [t for t in self.spec.timers if t.id != timer_id]

    # -- creation ---------------------------------------------------------------

    def create(self, runtime=None) -> "RunningNode":
        runtime = runtime or self.runtime
        if runtime is None:
            raise NodewrapError("node has no runtime; pass one to create()")
        self.spec.validate()
        return runtime._create(self)


class _Program:
    """Immutable handler binding; swapped wholesale, read once per delivery."""

    __slots__ = ("pipeline", "handler", "version")

    def __init__(self, pipeline, handler, version):
        self.pipeline = pipeline
        self.handler = handler
        self.version = version


class _LiveSub:
    def __init__(self, node, endpoint_id, set_name, topic, schema, program,
                 relay_target=None, origin_node=None, kind="sub"):
        self.node = node
        self.endpoint_id = endpoint_id
        self.set = set_name
        self.topic = topic
        self.schema = schema
        self.program = program
        self.relay_target = relay_target
        self.origin_node = origin_node
        self.kind = kind
        self.handle = None
        self.errors = 0
        self.processed = 0

    # one delivery, serialized by the client dispatch thread
    def on_delivery(self, incoming):
        program = self.program
        node = self.node
        self.processed += 1
        try:
            if program.handler is not None:
                arg = incoming.value() if incoming.can_decode() else RawPayload(
                    incoming.bytes(), incoming.schema)
                program.handler(arg)
                return
            origin = incoming.origin
            if origin is None and self.origin_node is not None:
                origin = (self.origin_node, incoming.seq)
            if program.pipeline is None:
                if self.relay_target is not None:
                    node._forward(self.relay_target, incoming.bytes(), incoming.schema, origin)
                return
            spec = node.runtime.pipelines.get(program.pipeline)
            if spec.reads_message:
                if not incoming.can_decode():
                    raise StageTypeError(
                        f"pipeline {spec.name!r} needs decoded input but schema "
                        f"{incoming.schema!r} is unknown"
                    )
                message, schema = incoming.value(), incoming.schema
            else:
                message, schema = RawPayload(incoming.bytes(), incoming.schema), None
            result = evaluate(spec, message, node._eval_ctx(), schema)
            if result.dropped:
                return
            forwards = result.forwards
            if not forwards and self.relay_target is not None:
                if isinstance(result.working, RawPayload):
                    forwards = [(self.relay_target, result.working.data, result.working_schema)]
                else:
                    forwards = [(self.relay_target, result.working, result.working_schema)]
            for topic, payload, schema_hint in forwards:
                node._forward(topic, payload, schema_hint, origin)
        except NodewrapError as exc:
            self.errors += 1
            log.warning("%s: handler on %s dropped a message: %s", node.name, self.topic, exc)
        except EVAL_ABORT as exc:
            self.errors += 1
            log.warning("%s: handler on %s dropped a message: %s", node.name, self.topic,
                        abort_error(exc))
        except Exception:
            self.errors += 1
            log.exception("%s: handler on %s failed", node.name, self.topic)


class _Timer:
    def __init__(self, node, spec: TimerSpec):
        self.node = node
        self.spec = spec
        self.fired = 0
        self.errors = 0
        self._stop = threading.Event()
        self._thread = threading.Thread(
            target=self._run, name=f"timer-{node.name}-{spec.id}", daemon=True
        )

    def start(self):
        self._thread.start()

    def stop(self):
        self._stop.set()

    def join(self, timeout=2.0):
        self._thread.join(timeout)

    def _run(self):
        clock = self.node.runtime.clock
        period = self.spec.period
        t0 = clock.now()
        k = 1
        while not self._stop.is_set():
            if not clock.sleep_until(t0 + k * period, self._stop):
                return
            self._fire()
            # fixed-rate schedule: late ticks fire once, fully missed windows are skipped
            k = max(k + 1, int((clock.now() - t0) / period) + 1)

    def _fire(self):
        try:
            if self.spec.handler is not None:
                self.spec.handler()
            else:
                from ..pipeline import emit_program

                spec = self.node.runtime.pipelines.get(self.spec.pipeline)
                for topic, value in emit_program(spec, self.node._eval_ctx()):
                    self.node._forward(topic, value, None, None)
            self.fired += 1
        except NodewrapError as exc:
            self.errors += 1
            log.warning("%s: timer %d tick failed: %s", self.node.name, self.spec.id, exc)
        except EVAL_ABORT as exc:
            self.errors += 1
            log.warning("%s: timer %d tick failed: %s", self.node.name, self.spec.id, abort_error(exc))
        except Exception:
            self.errors += 1
            log.exception("%s: timer %d tick failed", self.node.name, self.spec.id)


class RunningNode:
    """A created node: live endpoints, timers, and the wrap wiring if based."""

    def __init__(self, runtime, spec: NodeSpec, builder_ids: int):
        self.runtime = runtime
        self.spec = spec.clone()
        self._ids = builder_ids
        self.state = "running"
        self._lock = threading.RLock()
        self._program_version = 0
        self._pubs = {}
        self._subs = {}
        self._timers = {}
        self._wiring = None
        self._base_handle = None
        self.client = None
        self.reuse = _EndpointSet(self, REUSE)
        self.new = _EndpointSet(self, NEW)

    @property
    def name(self):
        return self.spec.name

    # ------------------------------------------------------------- lifecycle

    def _start(self):
        """Bring the declared spec live; called by the runtime exactly once."""
        runtime = self.runtime
        plan = wrap_engine.plan_wrap(self.spec) if self.spec.base else None
        self.client = runtime._make_client(self.name)
        try:
            for endpoint in self.spec.endpoints:
                if endpoint.direction == PUBLISH:
                    self._ensure_pub(endpoint.topic, endpoint.schema)
            for endpoint in self.spec.endpoints:
                if endpoint.direction == SUBSCRIBE and endpoint.set == NEW:
                    self._install_new_sub(endpoint)
            if plan is not None:
                self._apply_wrap(plan)
            for name, value in self.spec.params.items():
                runtime.params.set(name, value)
            for timer_spec in self.spec.timers:
                self._install_timer(timer_spec)
        except Exception:
            self._teardown(stop_base=True)
            raise
        return self

    def _apply_wrap(self, plan):
        """Install relays, then cut the base over (attach) or spawn it aliased (launch)."""
        runtime = self.runtime
        base_running = any(n["name"] == plan.base for n in self.client.snapshot()["nodes"])
        mode = "attach" if base_running else "launch"
        for relay in plan.relays:
            self._install_relay(relay, plan.base)
        if mode == "attach":
            for ext, internal in plan.alias_pairs:
                self.client.set_alias(plan.base, ext, internal)
        else:
            self._base_handle = runtime.launcher.spawn(
                plan.base_package, plan.base, node_name=plan.base,
                aliases=plan.alias_pairs, extra_args=self.spec.base_args,
            )
        self._wiring = {"plan": plan, "mode": mode, "active": True}

    def _install_relay(self, relay, base_name):
        if relay.pipeline is not None:
            # typed actions on relays are validated against the declared schema
            check_pipeline(
                self.runtime.pipelines.get(relay.pipeline),
                registry=self.runtime.registry,
                input_schema=relay.schema,
                publications=self._allowed_targets() | {relay.target},
            )
        if relay.kind == wrap_engine.REUSE_IN:
            self._ensure_pub(relay.target, relay.schema, admin_internal=True)
        sub = _LiveSub(
            self, self._next_id(), REUSE, relay.source, None,
            self._make_program(relay.pipeline, None),
            relay_target=relay.target, origin_node=base_name, kind=relay.kind,
        )
        sub.handle = self.client.subscribe(relay.source, None, sub.on_delivery)
        self._subs[relay.source] = sub

    def _install_new_sub(self, endpoint: Endpoint):
        if endpoint.pipeline is not None:
            check_pipeline(
                self.runtime.pipelines.get(endpoint.pipeline),
                registry=self.runtime.registry,
                input_schema=endpoint.schema,
                publications=self._allowed_targets(),
            )
        sub = _LiveSub(
            self, endpoint.id or self._next_id(), endpoint.set, endpoint.topic,
            endpoint.schema, self._make_program(endpoint.pipeline, endpoint.handler),
        )
        sub.handle = self.client.subscribe(endpoint.topic, endpoint.schema, sub.on_delivery)
        self._subs[endpoint.topic] = sub

    def _install_timer(self, timer_spec: TimerSpec):
        if timer_spec.pipeline is not None:
            spec = self.runtime.pipelines.get(timer_spec.pipeline)
            if not spec.has_emit:
                raise NoEmit(f"timer pipeline {timer_spec.pipeline!r} has no emit constructor")
            check_pipeline(spec, registry=self.runtime.registry,
                           publications=self._allowed_targets())
        timer = _Timer(self, timer_spec)
        self._timers[timer_spec.id] = timer
        timer.start()

    def stop(self, *, stop_base=True) -> None:
        with self._lock:
            if self.state == "stopped":
                return
            self.state = "stopped"
        self._teardown(stop_base=stop_base)
        self.runtime._forget(self)

    def _teardown(self, *, stop_base):
        for timer in list(self._timers.values()):
            timer.stop()
        for timer in list(self._timers.values()):
            timer.join()
        self._timers.clear()
        try:
            if self._wiring and self._wiring["active"]:
                self.unwrap()
        except NodewrapError as exc:
            log.warning("%s: unwrap during stop failed: %s", self.name, exc)
        if stop_base and self._base_handle is not None:
            self.runtime.launcher.stop(self._base_handle)
            self._base_handle = None
        if self.client is not None:
            self.client.close()
            self.client = None

    def unwrap(self) -> None:
        """Remove interception: aliases cleared, relays drained and stopped; idempotent."""
        with self._lock:
            wiring = self._wiring
            if not wiring or not wiring["active"]:
                return
            plan = wiring["plan"]
            base_alive = any(n["name"] == plan.base for n in self.client.snapshot()["nodes"])
            for ext in plan.aliases:
                if not base_alive:
                    break  # a dead base has no endpoints left to restore
                try:
                    self.client.clear_alias(plan.base, ext)
                except NodewrapError as exc:
                    log.warning("%s: clearing alias %s on %s: %s", self.name, ext, plan.base, exc)
            # aliases are gone, so relay sources receive nothing new; let the
            # in-flight tail drain before tearing the relays down
            for relay in plan.relays:
                sub = self._subs.get(relay.source)
                if sub is not None:
                    self._quiesce_sub(sub)
            for relay in plan.relays:
                sub = self._subs.pop(relay.source, None)
                if sub is not None and sub.handle is not None:
                    self.client.unsubscribe(sub.handle)
                pub = self._pubs.pop(relay.target, None)
                if pub is not None:
                    self.client.unsubscribe(pub)
            wiring["active"] = False

    @staticmethod
    def _quiesce_sub(sub, idle=0.05, timeout=2.0):
        import time as _time

        deadline = _time.monotonic() + timeout
        last = sub.processed
        stable_since = _time.monotonic()
        while _time.monotonic() < deadline:
            _time.sleep(0.01)
            current = sub.processed
            if current != last:
                last = current
                stable_since = _time.monotonic()
            elif _time.monotonic() - stable_since >= idle:
                return

    # ------------------------------------------------------------ mutation API

    def base_package(self, _package):
        raise NodewrapError("base reference cannot change on a running node")

    base_node = base_package

    def _next_id(self):
        self._ids += 1
        return self._ids

    def _make_program(self, pipeline, handler):
        self._program_version += 1
        if pipeline is not None:
            self.runtime.pipelines.get(pipeline)  # UnknownPipeline now, not at dispatch
        return _Program(pipeline, handler, self._program_version)

    def _check_running(self):
        if self.state != "running":
            raise NodeStopped(f"node {self.name} is stopped")

    def _add_publication(self, set_name, topic, schema, pipeline) -> int:
        with self._lock:
            self._check_running()
            existing = self.spec.endpoint_for(set_name, PUBLISH, topic)
            if existing is not None:
                if existing.schema != schema:
                    raise SchemaConflict(f"{topic} already declared as {existing.schema}")
                return existing.id
            clash = self.spec.find_direction(PUBLISH, topic)
            if clash is not None:
                raise SchemaConflict(f"{topic} already published via the {clash.set} set")
            self._ensure_pub(topic, schema)
            endpoint = Endpoint(set_name, PUBLISH, topic, schema, pipeline, id=self._next_id())
            self.spec.endpoints.append(endpoint)
            return endpoint.id

    def _add_subscription(self, set_name, topic, schema, pipeline, handler) -> int:
        """Live subscribe; re-declaring an existing (set, topic) swaps the pipeline
        atomically (same endpoint id, applied between handler invocations)."""
        with self._lock:
            self._check_running()
            if set_name == NEW and pipeline is None and handler is None:
                raise UnknownPipeline(f"new.subscribe({topic}) needs a pipeline or handler")
            existing = self.spec.endpoint_for(set_name, SUBSCRIBE, topic)
            if existing is not None:
                if existing.schema != schema:
                    raise SchemaConflict(f"{topic} already subscribed as {existing.schema}")
                program = self._make_program(pipeline, handler)
                if pipeline is not None:
                    check_pipeline(self.runtime.pipelines.get(pipeline),
                                   registry=self.runtime.registry, input_schema=schema,
                                   publications=self._allowed_targets())
                live = self._subs.get(topic)
                if live is not None:
                    live.program = program  # atomic swap: next delivery sees it
                existing.pipeline, existing.handler = pipeline, handler
                return existing.id
            clash = self.spec.find_direction(SUBSCRIBE, topic)
            if clash is not None:
                raise SchemaConflict(f"{topic} already subscribed via the {clash.set} set")
            endpoint = Endpoint(set_name, SUBSCRIBE, topic, schema, pipeline, handler,
                                id=self._next_id())
            self._install_new_sub(endpoint)
            self.spec.endpoints.append(endpoint)
            return endpoint.id

    def remove_endpoint(self, set_name, direction, topic) -> None:
        topic = normalize_topic(topic)
        with self._lock:
            self._check_running()
            endpoint = self.spec.endpoint_for(set_name, direction, topic)
            if endpoint is None:
                raise NotPublished(f"no {set_name} {direction} endpoint on {topic}")
            if direction == SUBSCRIBE:
                sub = self._subs.pop(topic, None)
                if sub is not None and sub.handle is not None:
                    self.client.unsubscribe(sub.handle)
            else:
                handle = self._pubs.pop(topic, None)
                if handle is not None:
                    self.client.unsubscribe(handle)
            self.spec.endpoints.remove(endpoint)

    def add_timer(self, period, pipeline=None, handler=None) -> int:
        period = float(period)
        if not (period > 0) or math.isnan(period):
            raise NonPositivePeriod(f"timer period {period!r} must be > 0")
        with self._lock:
            self._check_running()
            spec = TimerSpec(period, pipeline, handler, id=self._next_id())
            self._install_timer(spec)
            self.spec.timers.append(spec)
            return spec.id

    timer = add_timer

    def remove_timer(self, timer_id) -> None:
        with self._lock:
            timer = self._timers.pop(timer_id, None)
            if timer is not None:
                timer.stop()
                timer.join()
            self.spec.timers = [t for t in self.spec.timers if t.id != timer_id]

    def param(self, name, value):
        self.spec.params[name] = float(value)
        self.runtime.params.set(name, value)
        return self

    # --------------------------------------------------------------- publishing

    def write(self, topic, message) -> None:
        """Publish on one of this node's declared publications."""
        topic = normalize_topic(topic)
        self._check_running()
        endpoint = self.spec.find_direction(PUBLISH, topic)
        if endpoint is None:
            raise NotPublished(f"{self.name} does not publish {topic}")
        handle = self._pubs[topic]
        if isinstance(message, (bytes, bytearray, memoryview)):
            self.client.publish(handle, data=bytes(message))
        else:
            self.client.publish(handle, message)

    def _forward(self, topic, payload, schema_hint, origin) -> None:
        """Pipeline/relay output path; creates lazy publications for replace targets."""
        handle = self._pubs.get(topic)
        if handle is None:
            with self._lock:
                handle = self._pubs.get(topic)
                if handle is None:
                    if schema_hint is None:
                        raise NotPublished(f"{self.name}: no publication for {topic} and no schema hint")
                    handle = self._ensure_pub(topic, schema_hint)
        if isinstance(payload, (bytes, bytearray, memoryview)):
            self.client.publish(handle, data=bytes(payload), origin=origin)
        else:
            self.client.publish(handle, payload, origin=origin)

    def _ensure_pub(self, topic, schema, admin_internal=False):
        handle = self._pubs.get(topic)
        if handle is None:
            handle = self.client.advertise(topic, schema)
            self._pubs[topic] = handle
        elif schema is not None and handle.schema != schema:
            raise SchemaConflict(f"{topic} already advertised as {handle.schema}")
        return handle

    def _allowed_targets(self) -> set:
        targets = self.spec.publish_topics()
        targets.update(r.external for r in self.spec.replaces)
        return targets

    def _eval_ctx(self) -> EvalContext:
        return EvalContext(
            params=self.runtime.params,
            registry=self.runtime.registry,
            publications=None,  # targets were validated at install
        )

    # -------------------------------------------------------------- inspection

    def endpoint_stats(self) -> dict:
        with self._lock:
            return {
                topic: {"processed": sub.processed, "errors": sub.errors,
                        "pipeline": sub.program.pipeline, "kind": sub.kind}
                for topic, sub in self._subs.items()
            }

    def timer_stats(self) -> dict:
        with self._lock:
            return {tid: {"fired": t.fired, "errors": t.errors, "period": t.spec.period}
                    for tid, t in self._timers.items()}

    def wiring(self):
        return copy.deepcopy({k: v for k, v in (self._wiring or {}).items() if k != "plan"}) | (
            {"aliases": dict(self._wiring["plan"].aliases)} if self._wiring else {}
        )
