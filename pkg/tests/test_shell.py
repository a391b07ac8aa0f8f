import json

import pytest

from nodewrap.bus import BrokerClient, Router
from nodewrap.runtime import Runtime
from nodewrap.serde import twist
from nodewrap.shell import Hub, ReplSession, spec_signature

from test_router import wait_for


@pytest.fixture
def router():
    return Router(queue_capacity=1 << 18)


@pytest.fixture
def hub(router):
    rt = Runtime(router=router, time_scale=1.0)
    hub = Hub(rt)
    yield hub
    hub.close()


@pytest.fixture
def repl(hub):
    return ReplSession(hub)


def test_interactive_session_turtle_control(repl, hub, router):
    """A complete interactive session: declare, wire, create."""
    assert "selected" in repl.eval("node turtle_control_node")
    assert repl.eval("pipeline show_pose {\n  log \"pose\"\n}") == "ok"
    assert repl.eval("new subscribe /turtle1/pose type Pose pipeline show_pose") == "ok"
    assert repl.eval("new publish /turtle1/cmd_vel type Twist") == "ok"
    assert "running" in repl.eval("create")

    snap = hub.runtime.snapshot()
    node = next(n for n in snap["nodes"] if n["name"] == "turtle_control_node")
    assert {"topic": "/turtle1/cmd_vel", "schema": "Twist"} in node["publications"]

    got = []
    obs = BrokerClient.local("obs", router)
    obs.subscribe("/turtle1/cmd_vel", "Twist", lambda m: got.append(m.value()))
    assert repl.eval("write /turtle1/cmd_vel Twist{linear.x := 2.0, angular.z := 1.8}") == "ok"
    assert wait_for(lambda: got == [twist(linear_x=2.0, angular_z=1.8)])
    assert "stopped" in repl.eval("stop")
    obs.close()


def test_empty_line_is_noop(repl):
    assert repl.eval("") == ""
    assert repl.eval("   ") == ""
    assert repl.eval("# a comment") == ""


def test_parse_error_has_caret_and_session_survives(repl):
    out = repl.eval("write")
    assert out.startswith("parse error:")
    assert "^" in out
    out = repl.eval("definitely not a command")
    assert "unknown command" in out
    assert "selected" in repl.eval("node still_works")


def test_errors_are_printed_not_raised(repl):
    assert repl.eval("create").startswith("error:")  # no node selected
    repl.eval("node x")
    out = repl.eval("new subscribe /t type Twist pipeline missing_pipe")
    assert out.startswith("error:") and "missing_pipe" in out


def test_param_set_and_help(repl):
    out = repl.eval("param set speed 6")
    assert "version 1" in out
    assert repl.eval("param get speed") == json.dumps({"name": "speed", "value": 6.0}, sort_keys=True)
    assert "param set NAME VALUE" in repl.eval("help")


def test_node_and_topic_listing(repl, hub):
    repl.eval("node lister")
    repl.eval("new publish /seen type Twist")
    repl.eval("create")
    out = repl.eval("node list")
    assert "lister" in out and "running" in out
    out = repl.eval("topic list")
    assert "/seen" in out and "Twist" in out
    out = repl.eval("node info lister")
    assert "/seen" in out
    out = repl.eval("topic info /seen")
    assert "Twist" in out
    assert repl.eval("topic info /ghost").startswith("error:")


def test_topic_pub_and_echo(repl, hub, router):
    got = []
    obs = BrokerClient.local("obs", router)
    obs.subscribe("/pubbed", "Twist", lambda m: got.append(m.value()["linear"]["x"]))
    assert repl.eval("topic pub /pubbed Twist{linear.x := 3.5}").startswith("{")
    assert wait_for(lambda: got == [3.5])

    # echo with a count: publish from a thread, collect two samples
    import threading

    def publish_soon():
        import time

        time.sleep(0.15)
        hub.execute("topic.pub", {"topic": "/pubbed", "schema": "Twist",
                                  "literal": "Twist{linear.x := 1.25}"})
        hub.execute("topic.pub", {"topic": "/pubbed", "schema": "Twist",
                                  "literal": "Twist{linear.x := 2.5}"})

    threading.Thread(target=publish_soon, daemon=True).start()
    out = repl.eval("topic echo /pubbed 2")
    assert "linear.x: 1.25" in out and "linear.x: 2.5" in out
    obs.close()


def test_echo_idle_topic_clean(repl):
    out = repl.eval("topic echo /silence 0")
    assert out == ""


def test_literal_with_param_reference(repl, hub):
    repl.eval("param set v 7")
    value = hub._literal_or_value({"literal": 'Twist{linear.x := param("v")}'})
    assert value["linear"]["x"] == 7.0


def test_kobuki_session_structure(repl, hub):
    """A full wrapping declaration (base not running: create would launch; we only
    check the declared structure here)."""
    repl.eval("node experimental_move_base")
    repl.eval("base move_base move_base")
    repl.eval("reuse publish /cmd_vel type Twist")
    repl.eval("reuse publish /move_base/current_goal type PoseStamped")
    repl.eval("reuse publish /move_base/goal type MoveBaseActionGoal")
    repl.eval("reuse subscribe /tf_static type TFMessage")
    repl.eval("reuse subscribe /move_base_simple/goal type PoseStamped")
    repl.eval("reuse subscribe /tf type TFMessage")
    repl.eval("pipeline relay_velocity {\n  relay to /mobile_base/commands/velocity\n}")
    repl.eval("new subscribe /cmd_vel type Twist pipeline relay_velocity")
    repl.eval("new publish /mobile_base/commands/velocity type Twist")

    spec = hub.declared["experimental_move_base"].spec
    assert spec.base == ("move_base", "move_base")
    assert len([e for e in spec.endpoints if e.set == "reuse"]) == 6
    assert len([e for e in spec.endpoints if e.set == "new"]) == 2


def test_repl_api_equivalence(router):
    """A REPL session and its command-for-command API translation produce
    identical final snapshots."""
    from nodewrap.bus import normalize_snapshot

    def run_repl():
        rt = Runtime(router=Router(), time_scale=1.0)
        hub = Hub(rt)
        repl = ReplSession(hub)
        for line in [
            "node sess",
            "pipeline sink {\n  drop\n}",
            "new publish /out type Twist",
            "new subscribe /in type Twist pipeline sink",
            "create",
            "param set speed 4.5",
        ]:
            out = repl.eval(line)
            assert not out.startswith("error"), out
        snap = normalize_snapshot(rt.snapshot())
        params = rt.params.items()
        hub.close()
        return snap, params

    def run_api():
        rt = Runtime(router=Router(), time_scale=1.0)
        hub = Hub(rt)
        for op, args in [
            ("node.declare", {"name": "sess"}),
            ("pipeline.define", {"text": "pipeline sink {\n  drop\n}"}),
            ("node.endpoint.add", {"node": "sess", "set": "new", "direction": "publish",
                                   "topic": "/out", "schema": "Twist"}),
            ("node.endpoint.add", {"node": "sess", "set": "new", "direction": "subscribe",
                                   "topic": "/in", "schema": "Twist", "pipeline": "sink"}),
            ("node.create", {"node": "sess"}),
            ("param.set", {"name": "speed", "value": 4.5}),
        ]:
            hub.execute(op, args)
        snap = normalize_snapshot(rt.snapshot())
        params = rt.params.items()
        hub.close()
        return snap, params

    repl_snap, repl_params = run_repl()
    api_snap, api_params = run_api()
    # probe/tool sessions differ only by pid-suffixed names; strip them
    for snap in (repl_snap, api_snap):
        snap["nodes"] = [n for n in snap["nodes"] if not n["name"].startswith("nw_")]
        for t in snap["topics"]:
            t["publishers"] = [p for p in t["publishers"] if not p.startswith("nw_")]
            t["subscribers"] = [s for s in t["subscribers"] if not s.startswith("nw_")]
    assert repl_snap == api_snap
    assert repl_params == api_params


def test_hot_swap_via_repl(repl, hub, router):
    """Re-declaring the subscription replaces the handler live."""
    repl.eval("pipeline relay_velocity {\n  relay to /mobile_base/commands/velocity\n}")
    repl.eval(
        "pipeline control_velocity {\n"
        '  expr { if msg.linear.x > 0 { msg.linear.x := param("speed") }; '
        'forward("/mobile_base/commands/velocity") }\n'
        "}"
    )
    repl.eval("param set speed 4.5")
    repl.eval("node wrapper_free")
    repl.eval("new subscribe /cmd_vel type Twist pipeline relay_velocity")
    repl.eval("new publish /mobile_base/commands/velocity type Twist")
    repl.eval("create")

    got = []
    obs = BrokerClient.local("obs", router)
    obs.subscribe("/mobile_base/commands/velocity", "Twist",
                  lambda m: got.append(m.value()["linear"]["x"]))
    pub = BrokerClient.local("pub", router)
    h = pub.advertise("/cmd_vel", "Twist")

    pub.publish(h, twist(linear_x=0.3))
    assert wait_for(lambda: got == [0.3]), "identity relay first"

    out = repl.eval("new subscribe /cmd_vel type Twist pipeline control_velocity")
    assert out == "ok"
    pub.publish(h, twist(linear_x=0.3))
    assert wait_for(lambda: got == [0.3, 4.5]), "swapped handler overrides speed"

    repl.eval("param set speed 6")
    pub.publish(h, twist(linear_x=0.3))
    assert wait_for(lambda: got == [0.3, 4.5, 6.0])
    pub.publish(h, twist(linear_x=-0.3))
    assert wait_for(lambda: got == [0.3, 4.5, 6.0, -0.3]), "negative passes unchanged"
    repl.eval("stop")
    obs.close()
    pub.close()


def test_model_export_import_roundtrip_via_files(repl, hub, tmp_path):
    repl.eval("pipeline relay_velocity {\n  relay to /out\n}")
    repl.eval("node modeled")
    repl.eval("base demo turtle_sim")
    repl.eval("reuse publish /cmd_vel type Twist")
    repl.eval("new publish /out type Twist")
    repl.eval("new subscribe /in type Twist pipeline relay_velocity")
    repl.eval("timer 0.5 pipeline relay_velocity")

    path = tmp_path / "modeled.json"
    out = repl.eval(f"model export modeled {path}")
    assert "exported" in out
    original = spec_signature(hub.declared["modeled"].spec)

    del hub.declared["modeled"]
    out = repl.eval(f"model import {path}")
    assert "imported: modeled" in out
    assert spec_signature(hub.declared["modeled"].spec) == original
