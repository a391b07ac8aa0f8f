"""Command-line entry points.

    nodewrap broker [--port P]                 run the broker
    nodewrap shell [--broker URI] [--control-port P]
    nodewrap run PACKAGE NODE [-- ARGS...]     launch a package node standalone
    nodewrap scenario NAME [--json FILE]       scripted end-to-end scenario
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading

from ..bus import DEFAULT_PORT, BrokerServer, broker_uri
from ..runtime import Runtime
from .api import DEFAULT_CONTROL_PORT, ControlApiServer
from .hub import Hub
from .repl import ReplSession


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nodewrap",
                                     description="interactive pub/sub node wrapping")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    broker_p = sub.add_parser("broker", help="run the message broker")
    broker_p.add_argument("--port", type=int, default=DEFAULT_PORT)
    broker_p.add_argument("--host", default="127.0.0.1")

    shell_p = sub.add_parser("shell", help="interactive control shell")
    shell_p.add_argument("--broker", default=None, help="host:port (default NW_BROKER_URI)")
    shell_p.add_argument("--control-port", type=int, default=DEFAULT_CONTROL_PORT)
    shell_p.add_argument("--no-control", action="store_true",
                         help="do not serve the WebSocket control API")
    shell_p.add_argument("--time-scale", type=float, default=None)
    shell_p.add_argument("--script", default=None, help="run commands from a file, then exit")

    run_p = sub.add_parser("run", help="spawn one package node standalone")
    run_p.add_argument("package")
    run_p.add_argument("node")
    run_p.add_argument("--broker", default=None)
    run_p.add_argument("args", nargs="*", help="extra arguments after --")

    scen_p = sub.add_parser("scenario", help="run a scripted scenario end to end")
    scen_p.add_argument("name", choices=("turtle-circle", "kobuki-override", "safety-clamp",
                                         "overhead-report"))
    scen_p.add_argument("--json", default=None, help="write the machine-readable report here")

    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "broker":
        return _cmd_broker(args)
    if args.command == "shell":
        return _cmd_shell(args)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "scenario":
        return _cmd_scenario(args)
    return 2


def _cmd_broker(args) -> int:
    server = BrokerServer(host=args.host, port=args.port).start()
    print(f"broker listening on {server.uri}", flush=True)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda s, f: stop.set())
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass
    server.stop()
    return 0


def _cmd_shell(args) -> int:
    runtime = Runtime(broker_uri(args.broker), time_scale=args.time_scale)
    hub = Hub(runtime)
    api = None
    if not args.no_control:
        api = ControlApiServer(hub, port=args.control_port).start()
        print(f"control API on {api.uri}", flush=True)
    session = ReplSession(hub)
    try:
        if args.script:
            with open(args.script, encoding="utf-8") as fh:
                session.run(stdin=fh)
        else:
            session.run()
    finally:
        if api is not None:
            api.stop()
        hub.close()
    return 0


def _cmd_run(args) -> int:
    runtime = Runtime(broker_uri(args.broker))
    try:
        handle = runtime.launcher.spawn(args.package, args.node, extra_args=tuple(args.args))
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"running {args.package}/{args.node} as {handle.node_name} (pid {handle.pid}); ctrl-c stops", flush=True)
    try:
        while handle.state == "running":
            threading.Event().wait(0.2)
    except KeyboardInterrupt:
        runtime.launcher.stop(handle)
    runtime.stop_all()
    tail = handle.log_text()
    if tail:
        print(tail, end="")
    return 0 if handle.returncode in (0, None) else 1


def _cmd_scenario(args) -> int:
    from ..demo.scenarios import run_scenario

    report = run_scenario(args.name, json_path=args.json)
    print(report.render())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
