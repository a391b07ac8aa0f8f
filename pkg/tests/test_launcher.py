import os
import stat
import textwrap
import time

import pytest

from nodewrap.bus import BrokerServer
from nodewrap.errors import LaunchFailure, NoSuchPackage, NoSuchPackageNode, ValidationError
from nodewrap.launch import PackageRegistry, default_roots
from nodewrap.runtime import Runtime

from test_router import wait_for


@pytest.fixture
def server():
    srv = BrokerServer(port=0).start()
    yield srv
    srv.stop()


@pytest.fixture
def runtime(server):
    rt = Runtime(server.uri, hello_timeout=15.0)
    yield rt
    rt.stop_all()


def make_package(root, package, nodes):
    pkg = root / package
    pkg.mkdir(parents=True)
    lines = []
    for name, body in nodes.items():
        path = pkg / f"{name}.py"
        path.write_text(body)
        path.chmod(path.stat().st_mode | stat.S_IXUSR)
        lines.append(f"node {name} = {name}.py")
    (pkg / "package.mf").write_text("\n".join(lines) + "\n")
    return pkg


def test_default_roots_contain_demo_package():
    reg = PackageRegistry()
    assert "demo" in reg.packages()
    assert set(reg.packages()["demo"]) >= {"turtle_sim", "goal_seeker", "actuator_driver", "counter_pub"}


def test_resolve_and_first_match_wins(tmp_path):
    root_a = tmp_path / "a"
    root_b = tmp_path / "b"
    make_package(root_a, "pkg", {"n": "print('a')"})
    make_package(root_b, "pkg", {"n": "print('b')"})
    reg = PackageRegistry([str(root_a), str(root_b)])
    assert reg.resolve("pkg", "n") == str(root_a / "pkg" / "n.py")


def test_resolution_deterministic(tmp_path):
    make_package(tmp_path, "pkg", {"n": "pass"})
    a = PackageRegistry([str(tmp_path)])
    b = PackageRegistry([str(tmp_path)])
    assert a.resolve("pkg", "n") == b.resolve("pkg", "n")


def test_unknown_package_and_node(tmp_path):
    make_package(tmp_path, "pkg", {"n": "pass"})
    reg = PackageRegistry([str(tmp_path)])
    with pytest.raises(NoSuchPackage):
        reg.resolve("ghost", "n")
    with pytest.raises(NoSuchPackageNode):
        reg.resolve("pkg", "ghost")


def test_manifest_validation(tmp_path):
    pkg = tmp_path / "bad"
    pkg.mkdir()
    (pkg / "package.mf").write_text("node broken = missing.py\n")
    with pytest.raises(ValidationError):
        PackageRegistry([str(tmp_path)])


def test_env_package_path(tmp_path, monkeypatch):
    make_package(tmp_path, "extra", {"n": "pass"})
    monkeypatch.setenv("NW_PACKAGE_PATH", str(tmp_path))
    roots = default_roots()
    assert roots[0] == str(tmp_path)
    reg = PackageRegistry()
    assert "extra" in reg.packages()
    assert "demo" in reg.packages(), "built-in demo root still present"


def test_spawn_turtle_sim_appears_in_graph(runtime):
    handle = runtime.launcher.spawn("demo", "turtle_sim", extra_args=("--time-scale", "5"))
    assert handle.state == "running"
    assert any(n["name"] == "turtle_sim" for n in runtime.snapshot()["nodes"])
    node = next(n for n in runtime.snapshot()["nodes"] if n["name"] == "turtle_sim")
    assert node["pid"] == handle.pid
    rc = runtime.launcher.stop(handle, grace=3.0)
    assert handle.state in ("exited", "killed")
    assert wait_for(lambda: not any(n["name"] == "turtle_sim" for n in runtime.snapshot()["nodes"]))


def test_spawn_missing_executable(runtime):
    with pytest.raises(NoSuchPackageNode):
        runtime.launcher.spawn("demo", "no_such_node")


def test_launch_failure_when_no_hello(tmp_path, server):
    make_package(tmp_path, "silent", {"mute": "import time\ntime.sleep(60)\n"})
    rt = Runtime(server.uri, package_roots=[str(tmp_path)], hello_timeout=1.0)
    try:
        with pytest.raises(LaunchFailure):
            rt.launcher.spawn("silent", "mute")
        time.sleep(0.2)
        assert all(h.state != "running" for h in rt.launcher.handles()), "failed child is killed"
    finally:
        rt.stop_all()


def test_crash_visibility_and_exit_hook(tmp_path, server):
    make_package(tmp_path, "crashy", {
        "boom": textwrap.dedent("""
            import os, sys, time
            sys.path[:0] = os.environ.get("PYTHONPATH", "").split(os.pathsep)
            from nodewrap.bus import BrokerClient
            c = BrokerClient.connect(os.environ["NW_NODE_NAME"])
            time.sleep(0.4)
            sys.exit(3)
        """),
    })
    rt = Runtime(server.uri, package_roots=[str(tmp_path)], hello_timeout=10.0)
    exits = []
    rt.on_process_exit(lambda handle: exits.append((handle.node_name, handle.returncode)))
    try:
        handle = rt.launcher.spawn("crashy", "boom")
        t0 = time.monotonic()
        assert wait_for(lambda: handle.state != "running", timeout=5.0)
        assert time.monotonic() - t0 < 2.0, "exit noticed within a second of happening"
        assert handle.state == "exited" and handle.returncode == 3
        assert wait_for(lambda: exits == [("boom", 3)])
    finally:
        rt.stop_all()


def test_stop_is_idempotent_and_records_status(tmp_path, server):
    make_package(tmp_path, "pkg", {
        "n": textwrap.dedent("""
            import os, sys, time
            sys.path[:0] = os.environ.get("PYTHONPATH", "").split(os.pathsep)
            from nodewrap.bus import BrokerClient
            c = BrokerClient.connect(os.environ["NW_NODE_NAME"])
            time.sleep(60)
        """),
    })
    rt = Runtime(server.uri, package_roots=[str(tmp_path)], hello_timeout=10.0)
    try:
        handle = rt.launcher.spawn("pkg", "n")
        first = rt.launcher.stop(handle, grace=2.0)
        second = rt.launcher.stop(handle, grace=2.0)
        assert first == second == handle.returncode
    finally:
        rt.stop_all()


def test_sigterm_trapper_killed_at_grace_deadline(tmp_path, server):
    make_package(tmp_path, "stubborn", {
        "trap": textwrap.dedent("""
            import os, signal, sys, time
            sys.path[:0] = os.environ.get("PYTHONPATH", "").split(os.pathsep)
            signal.signal(signal.SIGTERM, lambda s, f: None)
            from nodewrap.bus import BrokerClient
            c = BrokerClient.connect(os.environ["NW_NODE_NAME"])
            while True:
                time.sleep(0.1)
        """),
    })
    rt = Runtime(server.uri, package_roots=[str(tmp_path)], hello_timeout=10.0)
    try:
        handle = rt.launcher.spawn("stubborn", "trap")
        t0 = time.monotonic()
        rt.launcher.stop(handle, grace=1.0)
        elapsed = time.monotonic() - t0
        assert handle.state == "killed"
        assert 0.9 <= elapsed <= 1.6, f"force kill at the grace deadline, took {elapsed:.2f}s"
    finally:
        rt.stop_all()


def test_no_orphans_after_shutdown(runtime):
    handles = [
        runtime.launcher.spawn("demo", "turtle_sim", node_name=f"t{i}",
                               extra_args=("--cmd-topic", f"/t{i}/cmd", "--pose-topic", f"/t{i}/pose"))
        for i in range(3)
    ]
    runtime.launcher.shutdown()
    time.sleep(0.2)
    for handle in handles:
        with pytest.raises(OSError):
            os.kill(handle.pid, 0)  # ESRCH: process must be gone
        assert handle.state in ("exited", "killed")


def test_output_captured_in_ring(tmp_path, server):
    make_package(tmp_path, "noisy", {
        "talker": textwrap.dedent("""
            import os, sys, time
            sys.path[:0] = os.environ.get("PYTHONPATH", "").split(os.pathsep)
            from nodewrap.bus import BrokerClient
            c = BrokerClient.connect(os.environ["NW_NODE_NAME"])
            print("hello from the spawned node", flush=True)
            print("warning line", file=sys.stderr, flush=True)
            time.sleep(30)
        """),
    })
    rt = Runtime(server.uri, package_roots=[str(tmp_path)], hello_timeout=10.0)
    try:
        handle = rt.launcher.spawn("noisy", "talker")
        assert wait_for(lambda: "hello from the spawned node" in handle.log_text())
        assert "warning line" in handle.log_text()
    finally:
        rt.stop_all()
