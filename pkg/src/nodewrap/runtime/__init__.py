from .clock import ENV_TIME_SCALE, SimClock, scale_from_env
from .context import Runtime
from .node import Endpoint, Node, NodeSpec, ReplaceEntry, RunningNode, TimerSpec

__all__ = [
    "ENV_TIME_SCALE",
    "Endpoint",
    "Node",
    "NodeSpec",
    "ReplaceEntry",
    "Runtime",
    "RunningNode",
    "SimClock",
    "TimerSpec",
    "scale_from_env",
]
