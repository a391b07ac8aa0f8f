"""Numbered-message publisher used by the transparency and overhead audits.

Publishes `count` messages with an embedded 1-based counter at a fixed sim
rate (0 = as fast as possible). With --wait-subs N it polls the graph until
the (alias-resolved) topic has at least N subscribers, so an audit never
loses the head of the stream to startup timing.
"""

from __future__ import annotations

import logging
import time

from .runner import connect, make_clock, parse_aliases, standard_parser, stop_event_on_sigterm

log = logging.getLogger("counter_pub")


def payload_for(schema: str, n: int, transforms: int) -> dict:
    if schema == "Twist":
        return {"linear": {"x": float(n), "y": 0.0, "z": 0.0},
                "angular": {"x": 0.0, "y": 0.0, "z": 0.0}}
    if schema == "TFMessage":
        entry = {"parent": "odom", "child": "base_link", "x": float(n), "y": 0.0, "theta": 0.0}
        pad = {"parent": "map", "child": "odom", "x": 0.0, "y": 0.0, "theta": 0.0}
        return {"transforms": [entry] + [dict(pad) for _ in range(max(0, transforms - 1))]}
    raise SystemExit(f"unsupported schema {schema!r}")


def counter_of(schema: str, value: dict) -> int:
    if schema == "Twist":
        return int(value["linear"]["x"])
    return int(value["transforms"][0]["x"])


def main(argv=None):
    parser = standard_parser("numbered-payload publisher")
    parser.add_argument("--topic", default="/data")
    parser.add_argument("--schema", default="Twist", choices=("Twist", "TFMessage"))
    parser.add_argument("--rate", type=float, default=100.0, help="sim Hz; 0 = full speed")
    parser.add_argument("--count", type=int, default=10000)
    parser.add_argument("--transforms", type=int, default=1)
    parser.add_argument("--wait-subs", type=int, default=0)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    stop = stop_event_on_sigterm()
    clock = make_clock(args)
    client = connect(args, "counter_pub")

    aliases = dict(parse_aliases(args.alias))
    effective_topic = aliases.get(args.topic, args.topic)
    if args.wait_subs > 0:
        while not stop.is_set():
            snap = client.snapshot()
            topic = next((t for t in snap["topics"] if t["name"] == effective_topic), None)
            if topic is not None and len(topic["subscribers"]) >= args.wait_subs:
                break
            time.sleep(0.02)

    pub = client.advertise(args.topic, args.schema)
    try:
        for n in range(1, args.count + 1):
            if stop.is_set():
                break
            if args.rate > 0:
                if not clock.sleep_until(n / args.rate, stop):
                    break
            client.publish(pub, payload_for(args.schema, n, args.transforms))
        log.info("published %d messages on %s", args.count, args.topic)
        time.sleep(0.3)  # let the tail flush before the socket closes
    finally:
        client.close()


if __name__ == "__main__":
    main()
