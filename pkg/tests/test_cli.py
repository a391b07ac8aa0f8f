import json
import os
import signal
import subprocess
import sys

SRC = os.path.join(os.path.dirname(__file__), "..", "src")


def run_cli(args, **kw):
    env = dict(os.environ)
    env["PYTHONPATH"] = SRC + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.run([sys.executable, "-m", "nodewrap.shell.cli", *args],
                          capture_output=True, text=True, env=env, **kw)


def spawn_cli(args, **kw):
    env = dict(os.environ)
    env["PYTHONPATH"] = SRC + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.Popen([sys.executable, "-m", "nodewrap.shell.cli", *args],
                            stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
                            text=True, env=env, **kw)


def test_help_exits_cleanly():
    result = run_cli(["--help"])
    assert result.returncode == 0
    assert "broker" in result.stdout and "scenario" in result.stdout


def test_broker_and_shell_script(tmp_path):
    broker = spawn_cli(["broker", "--port", "0"])
    try:
        line = broker.stdout.readline()
        assert "listening on" in line
        uri = line.strip().rsplit(" ", 1)[-1]

        script = tmp_path / "session.nw"
        script.write_text(
            "node scripted\n"
            "new publish /scripted/out type Twist\n"
            "create\n"
            "topic list\n"
            "node list\n"
            "stop\n"
        )
        shell = run_cli(["shell", "--broker", uri, "--no-control",
                         "--script", str(script)], timeout=30)
        assert shell.returncode == 0, shell.stdout + shell.stderr
        assert "/scripted/out" in shell.stdout
        assert "scripted" in shell.stdout
    finally:
        broker.send_signal(signal.SIGTERM)
        broker.wait(timeout=10)


def test_scenario_cli_writes_json(tmp_path):
    out = tmp_path / "report.json"
    result = run_cli(["scenario", "turtle-circle", "--json", str(out)], timeout=120)
    assert result.returncode == 0, result.stdout + result.stderr
    assert "PASS" in result.stdout
    report = json.loads(out.read_text())
    assert report["name"] == "turtle-circle" and report["passed"] is True
    assert report["metrics"]["radius_error_m"] <= 1e-3
