"""Wrap planning: turn a node spec with a base reference into the alias table
and relay set that intercept the base's topics.

For every reused PUBLISH topic t the base's output is rerouted to
/__wrap/<wrapper>/t and relayed back out under the original name; for every
reused SUBSCRIBE topic the relay runs inward; a replace entry reroutes the
base topic and re-exposes it under a different external name through a
pipeline. Base topics not listed stay untouched — wrapping hides nothing it
was not asked to intercept. Relays default to raw passthrough; attaching a
pipeline that reads the message switches that relay to decode mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bus.topics import normalize_topic, wrap_internal_name
from .errors import MissingBase, OverlappingSets

REUSE_IN = "reuse-in"
REUSE_OUT = "reuse-out"
REPLACE = "replace"


@dataclass(frozen=True)
class Relay:
    kind: str            # reuse-in | reuse-out | replace
    source: str          # topic the relay subscribes to
    target: str          # topic the relay publishes to
    schema: str | None   # declared schema (None: take from deliveries)
    pipeline: str = None  # None = identity passthrough


@dataclass
class WrapPlan:
    wrapper: str
    base: str
    base_package: str
    aliases: dict = field(default_factory=dict)    # external -> internal
    relays: tuple = ()

    @property
    def alias_pairs(self) -> list:
        return sorted(self.aliases.items())


def plan_wrap(spec) -> WrapPlan:
    """Pure planning step; `spec` is a NodeSpec with a base reference."""
    if spec.base is None:
        raise MissingBase(f"node {spec.name!r} has no base reference")
    package, base_node = spec.base

    reuse_topics = {e.topic for e in spec.endpoints if e.set == "reuse"}
    replace_sources = {normalize_topic(r.base_topic) for r in spec.replaces}
    overlap = reuse_topics & replace_sources
    if overlap:
        raise OverlappingSets(f"topics in both reuse and replace: {sorted(overlap)}")

    aliases = {}
    relays = []
    for endpoint in spec.endpoints:
        if endpoint.set != "reuse":
            continue
        internal = wrap_internal_name(spec.name, endpoint.topic)
        aliases[endpoint.topic] = internal
        if endpoint.direction == "publish":
            relays.append(Relay(REUSE_OUT, internal, endpoint.topic, endpoint.schema, endpoint.pipeline))
        else:
            relays.append(Relay(REUSE_IN, endpoint.topic, internal, endpoint.schema, endpoint.pipeline))
    for entry in spec.replaces:
        source = normalize_topic(entry.base_topic)
        internal = wrap_internal_name(spec.name, source)
        aliases[source] = internal
        relays.append(Relay(REPLACE, internal, normalize_topic(entry.external), None, entry.pipeline))

    return WrapPlan(spec.name, base_node, package, aliases, tuple(relays))


def reachable_topics(plan: WrapPlan, base_publishes: set) -> dict:
    """Where each base-published topic surfaces externally under the plan
    (identity for untouched topics). Used by topology tests."""
    out = {}
    relay_by_source = {r.source: r for r in plan.relays if r.kind in (REUSE_OUT, REPLACE)}
    for topic in base_publishes:
        internal = plan.aliases.get(topic)
        if internal is None:
            out[topic] = topic
        elif internal in relay_by_source:
            out[topic] = relay_by_source[internal].target
        else:
            out[topic] = None  # intercepted but not re-exposed
    return out
