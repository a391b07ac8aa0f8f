"""Scaffolding shared by the demo node executables.

Every demo node honors the child contract: NW_BROKER_URI and NW_NODE_NAME
from the environment, repeated `--alias ext=int` flags, NW_TIME_SCALE, and
a prompt HELLO at startup. SIGTERM asks the node to wind down cleanly.
"""

from __future__ import annotations

import argparse
import os
import signal
import threading

from ..bus import BrokerClient
from ..runtime.clock import SimClock, scale_from_env
from ..serde import builtin_registry


def standard_parser(description: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--alias", action="append", default=[], metavar="EXT=INT",
                        help="topic alias installed at HELLO (repeatable)")
    parser.add_argument("--name", default=None, help="node name (default: NW_NODE_NAME)")
    parser.add_argument("--time-scale", type=float, default=None,
                        help="simulation speed multiplier (default: NW_TIME_SCALE or 1)")
    return parser


def parse_aliases(flags) -> list:
    pairs = []
    for flag in flags:
        ext, sep, internal = flag.partition("=")
        if not sep:
            raise SystemExit(f"--alias needs EXT=INT, got {flag!r}")
        pairs.append((ext, internal))
    return pairs


def make_clock(args) -> SimClock:
    scale = args.time_scale if args.time_scale is not None else scale_from_env()
    return SimClock(scale)


def connect(args, default_name: str, registry=None) -> BrokerClient:
    name = args.name or os.environ.get("NW_NODE_NAME") or default_name
    return BrokerClient.connect(name, aliases=parse_aliases(args.alias),
                                registry=registry or builtin_registry())


def stop_event_on_sigterm() -> threading.Event:
    stop = threading.Event()

    def handler(signum, frame):
        stop.set()

    signal.signal(signal.SIGTERM, handler)
    signal.signal(signal.SIGINT, handler)
    return stop
