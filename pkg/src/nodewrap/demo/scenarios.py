"""Scripted end-to-end scenarios: the demo robot's three experiments.

Each scenario boots a private broker and control hub, then drives the whole
thing through the WebSocket control API exactly as a user (or the web
console) would: launches, wiring, pipeline swaps, parameter changes and all
observations go through public surfaces. Reports carry the measured
quantities plus pass/fail checks; scenario exit status follows the checks.

Sim time is accelerated (the counted quantities are exact; only wall clock
shrinks). Scale factors are chosen so each scenario lands in seconds.
"""

from __future__ import annotations

import json
import statistics
import threading
import time
from dataclasses import dataclass, field

from ..bus import BrokerServer
from ..errors import AssertionFailure, NodewrapError
from ..runtime import Runtime
from ..shell import ControlApiServer, Hub
from .driver import ApiDriver
from .unicycle import fit_circle, radial_deviations

SCENARIO_NAMES = ("turtle-circle", "kobuki-override", "safety-clamp", "overhead-report")

CONTROL_VELOCITY_TEXT = (
    "pipeline control_velocity {\n"
    '  expr { if msg.linear.x > 0 { msg.linear.x := param("speed") }; '
    'forward("/mobile_base/commands/velocity") }\n'
    "}"
)


@dataclass
class ScenarioReport:
    name: str
    checks: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def check(self, label: str, ok: bool, detail: str = "") -> None:
        self.checks.append((label, bool(ok), detail))

    def render(self) -> str:
        lines = [f"scenario {self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for label, ok, detail in self.checks:
            suffix = f"  ({detail})" if detail else ""
            lines.append(f"  [{'ok' if ok else 'FAIL'}] {label}{suffix}")
        if self.metrics:
            lines.append("  metrics:")
            for key in sorted(self.metrics):
                lines.append(f"    {key} = {self.metrics[key]}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "checks": [{"label": l, "ok": ok, "detail": d} for l, ok, d in self.checks],
                "metrics": self.metrics}


class ScenarioStack:
    """Broker + hub + control API + driver, on ephemeral ports."""

    def __init__(self, *, time_scale=1.0):
        self.broker = None
        self.hub = None
        self.api = None
        self.driver = None
        self.time_scale = time_scale

    def __enter__(self):
        # audit subscribers must never lose a message to backpressure
        self.broker = BrokerServer(port=0, queue_capacity=1 << 17).start()
        runtime = Runtime(self.broker.uri, time_scale=self.time_scale)
        self.hub = Hub(runtime)
        self.api = ControlApiServer(self.hub, port=0).start()
        self.driver = ApiDriver(self.api.uri)
        return self

    def __exit__(self, *exc):
        if self.driver:
            self.driver.close()
        if self.api:
            self.api.stop()
        if self.hub:
            self.hub.close()
        if self.broker:
            self.broker.stop()
        return False


def run_scenario(name: str, *, json_path=None, **kw) -> ScenarioReport:
    runner = {
        "turtle-circle": turtle_circle,
        "kobuki-override": kobuki_override,
        "safety-clamp": safety_clamp,
        "overhead-report": overhead_report,
    }.get(name)
    if runner is None:
        raise NodewrapError(f"unknown scenario {name!r} (choose from {SCENARIO_NAMES})")
    report = runner(**kw)
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    return report


def assert_report(report: ScenarioReport) -> ScenarioReport:
    if not report.passed:
        raise AssertionFailure("\n" + report.render())
    return report


# --------------------------------------------------------------------------
# turtle-circle: 1 Hz Twist{2.0, 1.8} for 60 simulated seconds -> radius v/w
# --------------------------------------------------------------------------

def turtle_circle(*, time_scale=30.0, sim_seconds=60.0) -> ScenarioReport:
    report = ScenarioReport("turtle-circle")
    t_start = time.monotonic()
    with ScenarioStack(time_scale=time_scale) as stack:
        d = stack.driver
        pose_sub = d.subscribe("/turtle1/pose", rate=None)
        d.request("pipeline.define", {"text": (
            "pipeline circle_cmd {\n"
            "  expr { emit Twist {linear.x := 2.0, angular.z := 1.8} to /turtle1/cmd_vel }\n"
            "}")})
        d.request("pipeline.define", {"text": 'pipeline show_pose {\n  log "pose"\n}'})
        d.request("node.declare", {"name": "turtle_control_node"})
        d.request("node.base", {"node": "turtle_control_node",
                                "package": "demo", "base_node": "turtle_sim"})
        d.request("node.endpoint.add", {"node": "turtle_control_node", "set": "new",
                                        "direction": "publish", "topic": "/turtle1/cmd_vel",
                                        "schema": "Twist"})
        d.request("node.endpoint.add", {"node": "turtle_control_node", "set": "new",
                                        "direction": "subscribe", "topic": "/turtle1/pose",
                                        "schema": "Pose", "pipeline": "show_pose"})
        d.request("node.timer.add", {"node": "turtle_control_node", "period": 1.0,
                                     "pipeline": "circle_cmd"})
        d.request("node.create", {"node": "turtle_control_node"})

        expected_points = int(sim_seconds * 10)  # pose publishes at 10 Hz sim
        samples = d.samples(pose_sub, expected_points,
                            timeout=sim_seconds / time_scale * 3 + 30)
        d.request("node.stop", {"node": "turtle_control_node"})

    wall = time.monotonic() - t_start
    points = [(s["value"]["x"], s["value"]["y"]) for s in samples]
    moving = [p for p in points if p != (0.0, 0.0)]
    cx, cy, radius = fit_circle(points)
    deviations = radial_deviations(points, cx, cy, radius)
    target = 2.0 / 1.8

    report.metrics.update({
        "points": len(points), "moving_points": len(moving),
        "radius_m": radius, "target_radius_m": target,
        "radius_error_m": abs(radius - target),
        "max_radial_deviation_m": max(deviations),
        "wall_seconds": round(wall, 3), "time_scale": time_scale,
    })
    report.check("trajectory spans 60 simulated seconds", len(points) >= expected_points,
                 f"{len(points)} pose points")
    report.check("fitted radius within 1e-3 of v/w = 1.1111 m",
                 abs(radius - target) <= 1e-3, f"radius {radius!r}")
    report.check("per-point radial deviation <= 1e-6 m",
                 max(deviations) <= 1e-6, f"max {max(deviations):.3e}")
    report.check("wall-clock runtime <= 5 s", wall <= 5.0, f"{wall:.2f}s")
    return report


# ---------------------------------------------------------------------------
# kobuki-override: wrap a running goal seeker, swap relay -> speed override
# ---------------------------------------------------------------------------

def kobuki_override(*, time_scale=10.0) -> ScenarioReport:
    report = ScenarioReport("kobuki-override")
    with ScenarioStack(time_scale=time_scale) as stack:
        d = stack.driver
        d.request("process.run", {"package": "demo", "pkg_node": "goal_seeker",
                                  "name": "move_base"})
        d.wait_graph(lambda g: any(
            s["topic"] == "/move_base_simple/goal"
            for n in g["nodes"] if n["name"] == "move_base"
            for s in n["subscriptions"]))
        d.request("topic.pub", {"topic": "/move_base_simple/goal", "schema": "PoseStamped",
                                "literal": 'PoseStamped{frame := "map", x := 1000.0}'})
        cmd_probe = d.subscribe("/cmd_vel", rate=None)
        d.samples(cmd_probe, 5)  # base is streaming before we wrap
        d.unsubscribe(cmd_probe)

        inputs_sub = d.subscribe("/__wrap/experimental_move_base/cmd_vel", rate=None)
        outputs_sub = d.subscribe("/mobile_base/commands/velocity", rate=None)

        d.request("pipeline.define", {"text": (
            "pipeline relay_velocity {\n  relay to /mobile_base/commands/velocity\n}")})
        d.request("pipeline.define", {"text": CONTROL_VELOCITY_TEXT})
        d.request("node.declare", {"name": "experimental_move_base"})
        d.request("node.base", {"node": "experimental_move_base",
                                "package": "move_base", "base_node": "move_base"})
        for topic, schema in [("/cmd_vel", "Twist"),
                              ("/move_base/current_goal", "PoseStamped"),
                              ("/move_base/goal", "MoveBaseActionGoal")]:
            d.request("node.endpoint.add", {"node": "experimental_move_base", "set": "reuse",
                                            "direction": "publish", "topic": topic,
                                            "schema": schema})
        for topic, schema in [("/tf_static", "TFMessage"),
                              ("/move_base_simple/goal", "PoseStamped"),
                              ("/tf", "TFMessage")]:
            d.request("node.endpoint.add", {"node": "experimental_move_base", "set": "reuse",
                                            "direction": "subscribe", "topic": topic,
                                            "schema": schema})
        d.request("node.endpoint.add", {"node": "experimental_move_base", "set": "new",
                                        "direction": "subscribe", "topic": "/cmd_vel",
                                        "schema": "Twist", "pipeline": "relay_velocity"})
        d.request("node.endpoint.add", {"node": "experimental_move_base", "set": "new",
                                        "direction": "publish",
                                        "topic": "/mobile_base/commands/velocity",
                                        "schema": "Twist"})
        d.request("node.create", {"node": "experimental_move_base"})

        graph = d.request("graph.get")["graph"]
        node_names = {n["name"] for n in graph["nodes"]}
        report.check("base and wrapper both visible",
                     {"move_base", "experimental_move_base"} <= node_names)

        # the first few outputs may predate the alias cutover (direct, no origin);
        # the identity phase proper is the relayed stream
        identity_batch = d.samples(outputs_sub, 40)
        relayed = [s for s in identity_batch if s["origin"]]
        report.check("identity relay first: forwarded commands match the base's",
                     all(s["value"]["linear"]["x"] == 2.0 for s in identity_batch),
                     "goal seeker cruises at vmax 2.0")
        report.check("relayed envelopes carry (publisher, seq) origin",
                     len(relayed) >= 20 and
                     all(s["origin"][0] == "move_base" for s in relayed),
                     f"{len(relayed)} relayed commands observed")

        d.request("param.set", {"name": "speed", "value": 4.5})
        d.request("node.endpoint.add", {"node": "experimental_move_base", "set": "new",
                                        "direction": "subscribe", "topic": "/cmd_vel",
                                        "schema": "Twist", "pipeline": "control_velocity"})
        override_45 = d.samples(outputs_sub, 40)
        after_swap = [s for s in override_45 if s["value"]["linear"]["x"] == 4.5]
        report.check("after live swap every positive command carries exactly 4.5",
                     len(after_swap) >= 20 and
                     all(s["value"]["linear"]["x"] in (2.0, 4.5) for s in override_45),
                     f"{len(after_swap)} overridden commands seen")

        pre_six = d.drain_samples(outputs_sub)
        d.request("param.set", {"name": "speed", "value": 6})
        post = d.samples(outputs_sub, 40)
        values = [s["value"]["linear"]["x"] for s in post]
        try:
            first_six = values.index(6.0)
        except ValueError:
            first_six = -1
        report.check("param change switches the stream to 6.0",
                     first_six != -1, f"first 6.0 at position {first_six}")
        report.check("switch lands within 3 in-flight messages of the set",
                     0 <= first_six <= 3, f"{first_six} stale commands after ack")
        report.check("single transition: no 4.5 after the first 6.0",
                     first_six != -1 and all(v == 6.0 for v in values[first_six:]),
                     "stream is 4.5* then 6.0*")

        # quiesce the base, then audit the full relay for loss/duplication
        d.request("process.stop", {"name": "move_base"})
        time.sleep(0.5)
        inputs = d.drain_samples(inputs_sub)
        outputs = (identity_batch + override_45 + pre_six + post
                   + d.drain_samples(outputs_sub))
        input_seqs = sorted(s["seq"] for s in inputs)
        origin_seqs = sorted(s["origin"][1] for s in outputs if s["origin"])
        lo, hi = origin_seqs[0], origin_seqs[-1]
        expected = list(range(lo, hi + 1))
        report.metrics.update({
            "relayed_messages": len(origin_seqs),
            "origin_span": [lo, hi],
            "time_scale": time_scale,
        })
        report.check("numbered-payload audit: zero loss, zero duplication across the swap",
                     origin_seqs == expected,
                     f"{len(origin_seqs)} messages, origins {lo}..{hi}")
        report.check("every relayed origin was an observed input",
                     set(origin_seqs) <= set(input_seqs))
        d.request("node.stop", {"node": "experimental_move_base"})
    return report


# ----------------------------------------------------------------------
# safety-clamp: wrap the actuator input; upstream demands 6, motor sees 5
# ----------------------------------------------------------------------

def safety_clamp(*, time_scale=10.0, min_messages=1000) -> ScenarioReport:
    report = ScenarioReport("safety-clamp")
    with ScenarioStack(time_scale=time_scale) as stack:
        d = stack.driver
        d.request("pipeline.define", {"text": "pipeline clamp5 {\n  clamp linear.x -5 5\n}"})
        d.request("pipeline.define", {"text": (
            "pipeline demand6 {\n"
            "  expr { emit Twist {linear.x := 6.0} to /mobile_base/commands/velocity }\n"
            "}")})

        d.request("node.declare", {"name": "safety_guard"})
        d.request("node.base", {"node": "safety_guard",
                                "package": "demo", "base_node": "actuator_driver"})
        d.request("node.endpoint.add", {"node": "safety_guard", "set": "reuse",
                                        "direction": "subscribe",
                                        "topic": "/mobile_base/commands/velocity",
                                        "schema": "Twist", "pipeline": "clamp5"})
        d.request("node.create", {"node": "safety_guard"})

        actuator_sub = d.subscribe("/__wrap/safety_guard/mobile_base/commands/velocity",
                                   rate=None)
        upstream_sub = d.subscribe("/mobile_base/commands/velocity", rate=None)
        odom_sub = d.subscribe("/odom", rate=None)

        d.request("node.declare", {"name": "command_source"})
        d.request("node.endpoint.add", {"node": "command_source", "set": "new",
                                        "direction": "publish",
                                        "topic": "/mobile_base/commands/velocity",
                                        "schema": "Twist"})
        d.request("node.timer.add", {"node": "command_source", "period": 0.01,
                                     "pipeline": "demand6"})
        d.request("node.create", {"node": "command_source"})

        delivered = d.samples(actuator_sub, min_messages, timeout=60)
        d.request("node.stop", {"node": "command_source"})
        upstream = d.drain_samples(upstream_sub)
        odom = d.drain_samples(odom_sub)
        d.request("node.stop", {"node": "safety_guard"})

    actuator_speeds = [s["value"]["linear"]["x"] for s in delivered]
    upstream_speeds = [s["value"]["linear"]["x"] for s in upstream]
    report.metrics.update({
        "actuator_messages": len(actuator_speeds),
        "upstream_messages": len(upstream_speeds),
        "max_actuator_speed": max(actuator_speeds),
        "min_actuator_speed": min(actuator_speeds),
        "max_upstream_speed": max(upstream_speeds),
        "odom_points": len(odom),
        "time_scale": time_scale,
    })
    report.check(f"actuator received >= {min_messages} messages",
                 len(actuator_speeds) >= min_messages, f"{len(actuator_speeds)}")
    report.check("upstream requested 6.0 throughout",
                 upstream_speeds and all(v == 6.0 for v in upstream_speeds),
                 f"{len(upstream_speeds)} requests")
    report.check("max |linear.x| at the actuator == 5.0 exactly",
                 max(abs(v) for v in actuator_speeds) == 5.0)
    report.check("every command was clamped to 5.0",
                 all(v == 5.0 for v in actuator_speeds))
    report.check("actuator drives on the clamped stream (odometry advances)",
                 len(odom) > 2 and odom[-1]["value"]["x"] > odom[0]["value"]["x"])
    return report


# ---------------------------------------------------------------------
# overhead-report: raw passthrough vs typed decode relay, 1 kHz, one hop
# ---------------------------------------------------------------------

def overhead_report(*, rate=1000.0, count=3000, transforms=100, json_path=None) -> ScenarioReport:
    """One-hop relay latency, raw passthrough vs typed decode, at the stated
    publish rate. Setup runs through the control API; the measurement taps are
    plain wire-protocol subscribers so the instrument stays off the measured
    path (broker envelope timestamps are the clock)."""
    from ..bus import BrokerClient

    report = ScenarioReport("overhead-report")

    def run_mode(mode: str) -> dict:
        with ScenarioStack(time_scale=1.0) as stack:
            d = stack.driver
            if mode == "typed":
                d.request("pipeline.define", {"text": (
                    "pipeline typed_identity {\n  scale transforms.0.x 1\n}")})

            internal_ts = {}
            external = []
            done_mark = threading.Event()
            probe_int = BrokerClient.connect("overhead_probe_in", stack.broker.uri, admin=True)
            probe_int.subscribe("/__wrap/tap/data", None,
                                lambda m: internal_ts.__setitem__(m.seq, m.ts_ns))
            probe_ext = BrokerClient.connect("overhead_probe_out", stack.broker.uri)

            def on_external(m):
                external.append((m.ts_ns, m.origin))
                if len(external) >= count:
                    done_mark.set()

            probe_ext.subscribe("/data", None, on_external)

            d.request("node.declare", {"name": "tap"})
            d.request("node.base", {
                "node": "tap", "package": "demo", "base_node": "counter_pub",
                "args": ["--topic", "/data", "--schema", "TFMessage",
                         "--transforms", str(transforms), "--rate", str(rate),
                         "--count", str(count), "--wait-subs", "2"],
            })
            endpoint = {"node": "tap", "set": "reuse", "direction": "publish",
                        "topic": "/data", "schema": "TFMessage"}
            if mode == "typed":
                endpoint["pipeline"] = "typed_identity"
            d.request("node.endpoint.add", endpoint)
            # create launches counter_pub with its alias table pre-installed; the
            # counter holds until both the relay and the internal probe subscribe
            d.request("node.create", {"node": "tap"})

            if not done_mark.wait(timeout=count / rate * 20 + 60):
                raise AssertionFailure(
                    f"{mode} relay delivered {len(external)}/{count} messages")
            d.request("node.stop", {"node": "tap"})
            probe_int.close()
            probe_ext.close()

        deltas = []
        for ts, origin in external:
            if origin and origin[1] in internal_ts:
                deltas.append((ts - internal_ts[origin[1]]) / 1e6)  # ms
        deltas.sort()
        return {
            "mode": mode, "samples": len(deltas),
            "p50_ms": round(statistics.median(deltas), 4),
            "p99_ms": round(deltas[int(len(deltas) * 0.99) - 1], 4),
            "mean_ms": round(statistics.fmean(deltas), 4),
        }

    raw = run_mode("raw")
    typed = run_mode("typed")
    import os

    report.metrics.update({
        "rate_hz": rate, "messages_per_mode": count, "transforms_per_message": transforms,
        "raw_passthrough": raw, "typed_decode": typed,
        "cpu_count": os.cpu_count(),
        "note": "broker envelope timestamps; queueing included, so a relay that "
                "cannot sustain the offered rate shows it in its percentiles",
    })
    report.check("raw relay latency <= typed relay latency at p50",
                 raw["p50_ms"] <= typed["p50_ms"],
                 f"raw {raw['p50_ms']}ms vs typed {typed['p50_ms']}ms")
    report.check("enough matched samples in both modes",
                 raw["samples"] >= count * 0.95 and typed["samples"] >= count * 0.95)
    return report
