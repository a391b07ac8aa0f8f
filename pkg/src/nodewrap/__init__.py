"""nodewrap: interactive pub/sub node construction and live node wrapping.

Create nodes from a fluent builder, intercept a running node's topics
through broker-side alias tables, and reshape handlers while everything
keeps running:

    from nodewrap import BrokerServer, Runtime

    broker = BrokerServer(port=0).start()
    rt = Runtime(broker.uri)
    rt.pipelines.define_stages("relay_velocity", "relay to /mobile_base/commands/velocity")

    wnode = rt.node("experimental_move_base")
    wnode.base_node("move_base").base_package("move_base")
    wnode.reuse.publish(topic="cmd_vel", schema="Twist")
    wnode.new.subscribe(topic="cmd_vel", schema="Twist", pipeline="relay_velocity") \\
             .publish(topic="mobile_base/commands/velocity", schema="Twist")
    running = wnode.create()
"""

__version__ = "0.1.0"

from . import errors
from .bus import BrokerClient, BrokerServer, Router
from .launch import Launcher, PackageRegistry
from .pipeline import ParameterStore, PipelineRegistry, parse_pipeline
from .runtime import Node, Runtime, RunningNode, SimClock
from .serde import SchemaRegistry, builtin_registry
from .wrap import WrapPlan, plan_wrap

__all__ = [
    "BrokerClient",
    "BrokerServer",
    "Launcher",
    "Node",
    "PackageRegistry",
    "ParameterStore",
    "PipelineRegistry",
    "Router",
    "RunningNode",
    "Runtime",
    "SchemaRegistry",
    "SimClock",
    "WrapPlan",
    "builtin_registry",
    "errors",
    "parse_pipeline",
    "plan_wrap",
]
