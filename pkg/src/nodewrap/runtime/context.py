"""Runtime: the shared context nodes are created into.

Owns the schema registry, pipeline registry, parameter store, launcher and
clock, and hands out broker sessions (in-process against a Router, or TCP
against a broker URI). One runtime per controlling process; each created
node gets its own broker session named after it.
"""

from __future__ import annotations

import logging
import os
import threading

from ..bus import BrokerClient, broker_uri
from ..errors import NameInUse, NoSuchNode
from ..launch import Launcher, PackageRegistry
from ..pipeline import ParameterStore, PipelineRegistry
from ..serde import builtin_registry
from .clock import SimClock, scale_from_env
from .node import Node, RunningNode

log = logging.getLogger(__name__)


class Runtime:
    def __init__(self, broker=None, *, router=None, registry=None, pipelines=None,
                 params=None, package_roots=None, time_scale=None, hello_timeout=10.0):
        self.router = router
        self.uri = None if router is not None else broker_uri(broker)
        self.registry = registry or builtin_registry()
        self.pipelines = pipelines or PipelineRegistry()
        self.params = params or ParameterStore()
        self.clock = SimClock(time_scale if time_scale is not None else scale_from_env())
        self.nodes: dict[str, RunningNode] = {}
        self._lock = threading.RLock()
        self._exit_hooks = []
        self.launcher = Launcher(
            registry=PackageRegistry(package_roots),
            broker_uri=self.uri,
            snapshot_fn=self.snapshot,
            on_exit=self._on_process_exit,
            hello_timeout=hello_timeout,
            time_scale=self.clock.scale if self.clock.scale != 1.0 else None,
        )
        self._probe = None

    # ------------------------------------------------------------- sessions

    def _make_client(self, name, aliases=()) -> BrokerClient:
        if self.router is not None:
            return BrokerClient.local(name, self.router, admin=True, aliases=aliases,
                                      registry=self.registry)
        return BrokerClient.connect(name, self.uri, admin=True, aliases=aliases,
                                    registry=self.registry)

    def observer(self, name) -> BrokerClient:
        """An extra admin session for tooling (echo, scenario probes)."""
        return self._make_client(name)

    def _probe_client(self) -> BrokerClient:
        with self._lock:
            if self._probe is None:
                self._probe = self._make_client(f"nw_probe_{os.getpid()}")
            return self._probe

    def snapshot(self) -> dict:
        return self._probe_client().snapshot()

    # ----------------------------------------------------------------- nodes

    def node(self, name) -> Node:
        return Node(name, runtime=self)

    def _create(self, builder: Node) -> RunningNode:
        with self._lock:
            if builder.name in self.nodes:
                raise NameInUse(f"node {builder.name!r} already running in this runtime")
            running = RunningNode(self, builder.spec, builder._ids)
            self.nodes[builder.name] = running
        try:
            running._start()
        except Exception:
            with self._lock:
                self.nodes.pop(builder.name, None)
            raise
        return running

    def _forget(self, running: RunningNode) -> None:
        with self._lock:
            if self.nodes.get(running.name) is running:
                del self.nodes[running.name]

    def get_node(self, name) -> RunningNode:
        with self._lock:
            node = self.nodes.get(name)
        if node is None:
            raise NoSuchNode(f"no running node {name!r} in this runtime")
        return node

    def stop_all(self) -> None:
        with self._lock:
            nodes = list(self.nodes.values())
        for node in nodes:
            node.stop()
        self.launcher.shutdown()
        with self._lock:
            if self._probe is not None:
                self._probe.close()
                self._probe = None

    # ----------------------------------------------------------------- hooks

    def on_process_exit(self, callback) -> None:
        self._exit_hooks.append(callback)

    def _on_process_exit(self, handle) -> None:
        for hook in list(self._exit_hooks):
            try:
                hook(handle)
            except Exception:  # pragma: no cover
                log.exception("process-exit hook failed")
