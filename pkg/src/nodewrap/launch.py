"""Package resolution and process supervision.

A package is a directory containing a `package.mf` manifest with lines

    node <name> = <relative path>

Search roots are ordered, first match wins; NW_PACKAGE_PATH prepends roots.
Children are spawned with NW_BROKER_URI / NW_NODE_NAME / NW_TIME_SCALE set,
alias pairs passed as repeated `--alias ext=int` flags, and must HELLO at the
broker within the launch timeout or they are killed. Output is captured in
64 KiB ring buffers instead of a terminal window.
"""

from __future__ import annotations

import logging
import os
import shlex
import signal
import subprocess
import sys
import threading
import time

from .errors import LaunchFailure, NoSuchPackage, NoSuchPackageNode, SpawnFailure, ValidationError

log = logging.getLogger(__name__)

MANIFEST_NAME = "package.mf"
ENV_PACKAGE_PATH = "NW_PACKAGE_PATH"
RING_BYTES = 64 * 1024


def default_roots() -> list:
    roots = []
    env = os.environ.get(ENV_PACKAGE_PATH)
    if env:
        roots.extend(p for p in env.split(os.pathsep) if p)
    here = os.path.dirname(os.path.abspath(__file__))
    roots.append(os.path.join(here, "demo", "packages"))
    return roots


def _parse_manifest(path: str) -> dict:
    nodes = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("=", 1)
            head = parts[0].split()
            if len(parts) != 2 or len(head) != 2 or head[0] != "node":
                raise ValidationError(f"{path}:{lineno}: expected 'node <name> = <path>'")
            nodes[head[1]] = parts[1].strip()
    return nodes


class PackageRegistry:
    def __init__(self, roots=None):
        self.roots = list(roots) if roots is not None else default_roots()
        self._packages: dict[str, dict[str, str]] = {}
        self.scan()

    def scan(self) -> None:
        packages: dict[str, dict[str, str]] = {}
        for root in self.roots:
            if not os.path.isdir(root):
                continue
            for entry in sorted(os.listdir(root)):
                pkg_dir = os.path.join(root, entry)
                manifest = os.path.join(pkg_dir, MANIFEST_NAME)
                if entry in packages or not os.path.isfile(manifest):
                    continue  # earlier root wins
                nodes = {}
                for node, rel in _parse_manifest(manifest).items():
                    path = os.path.join(pkg_dir, rel)
                    if not os.path.isfile(path):
                        raise ValidationError(f"{manifest}: node {node} path {rel!r} does not exist")
                    if not os.access(path, os.X_OK) and not path.endswith(".py"):
                        raise ValidationError(f"{manifest}: node {node} path {rel!r} is not executable")
                    nodes[node] = path
                packages[entry] = nodes
        self._packages = packages

    def resolve(self, package: str, node: str) -> str:
        pkg = self._packages.get(package)
        if pkg is None:
            raise NoSuchPackage(f"no package {package!r} under roots {self.roots}")
        path = pkg.get(node)
        if path is None:
            raise NoSuchPackageNode(f"package {package!r} has no node {node!r}")
        return path

    def packages(self) -> dict:
        return {pkg: sorted(nodes) for pkg, nodes in sorted(self._packages.items())}


class _Ring:
    """Fixed-size byte ring capturing the tail of a stream."""

    def __init__(self, limit=RING_BYTES):
        self._buf = bytearray()
        self._limit = limit
        self._lock = threading.Lock()

    def feed(self, chunk: bytes) -> None:
        with self._lock:
            self._buf.extend(chunk)
            if len(self._buf) > self._limit:
                del self._buf[: len(self._buf) - self._limit]

    def tail(self) -> bytes:
        with self._lock:
            return bytes(self._buf)


class ProcessHandle:
    def __init__(self, proc, package, node, node_name, argv):
        self.proc = proc
        self.pid = proc.pid
        self.package = package
        self.node = node
        self.node_name = node_name
        self.argv = argv
        self.state = "running"
        self.returncode = None
        self.stdout = _Ring()
        self.stderr = _Ring()
        self._lock = threading.Lock()
        self._killed = False

    def mark_exit(self, returncode: int) -> None:
        with self._lock:
            if self.state == "running":
                self.returncode = returncode
                self.state = "killed" if self._killed else "exited"

    def alive(self) -> bool:
        return self.proc.poll() is None

    def log_text(self) -> str:
        out = self.stdout.tail().decode("utf-8", "replace")
        err = self.stderr.tail().decode("utf-8", "replace")
        parts = []
        if out:
            parts.append(out if out.endswith("\n") else out + "\n")
        if err:
            parts.append("--- stderr ---\n" + err)
        return "".join(parts)


class Launcher:
    def __init__(self, *, registry=None, broker_uri=None, snapshot_fn=None, on_exit=None,
                 hello_timeout=10.0, time_scale=None):
        self.registry = registry or PackageRegistry()
        self.broker_uri = broker_uri
        self.snapshot_fn = snapshot_fn
        self.on_exit = on_exit
        self.hello_timeout = hello_timeout
        self.time_scale = time_scale
        self._handles: list[ProcessHandle] = []
        self._lock = threading.Lock()

    # --------------------------------------------------------------- spawning

    def spawn(self, package: str, node: str, *, node_name=None, aliases=(), extra_args=(),
              wait_hello=True) -> ProcessHandle:
        path = self.registry.resolve(package, node)
        node_name = node_name or node
        argv = [sys.executable, path] if path.endswith(".py") else [path]
        for ext, internal in aliases:
            argv += ["--alias", f"{ext}={internal}"]
        argv += list(extra_args)

        env = dict(os.environ)
        if self.broker_uri:
            env["NW_BROKER_URI"] = self.broker_uri
        env["NW_NODE_NAME"] = node_name
        if self.time_scale is not None and "NW_TIME_SCALE" not in env:
            env["NW_TIME_SCALE"] = repr(self.time_scale)
        env["PYTHONPATH"] = os.pathsep.join(
            [p for p in sys.path if p] + [env.get("PYTHONPATH", "")]
        ).rstrip(os.pathsep)

        try:
            proc = subprocess.Popen(
                argv, env=env, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                start_new_session=True,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot spawn {' '.join(shlex.quote(a) for a in argv)}: {exc}") from None

        handle = ProcessHandle(proc, package, node, node_name, argv)
        threading.Thread(target=self._pump, args=(proc.stdout, handle.stdout), daemon=True).start()
        threading.Thread(target=self._pump, args=(proc.stderr, handle.stderr), daemon=True).start()
        threading.Thread(target=self._watch, args=(handle,), daemon=True).start()
        with self._lock:
            self._handles.append(handle)
        log.info("spawned %s/%s as %s (pid %d)", package, node, node_name, handle.pid)

        if wait_hello and self.snapshot_fn is not None:
            self._await_hello(handle)
        return handle

    def _await_hello(self, handle: ProcessHandle) -> None:
        deadline = time.monotonic() + self.hello_timeout
        while time.monotonic() < deadline:
            if not handle.alive():
                raise LaunchFailure(
                    f"{handle.node_name} exited (rc={handle.proc.poll()}) before HELLO\n{handle.log_text()}"
                )
            snap = self.snapshot_fn()
            if any(n["name"] == handle.node_name for n in snap["nodes"]):
                return
            time.sleep(0.02)
        self.stop(handle, grace=0.5)
        raise LaunchFailure(f"{handle.node_name} sent no HELLO within {self.hello_timeout}s")

    @staticmethod
    def _pump(stream, ring: _Ring) -> None:
        try:
            for chunk in iter(lambda: stream.read1(4096), b""):
                ring.feed(chunk)
        except (OSError, ValueError):
            pass

    def _watch(self, handle: ProcessHandle) -> None:
        rc = handle.proc.wait()
        handle.mark_exit(rc)
        log.info("node %s (pid %d) %s rc=%s", handle.node_name, handle.pid, handle.state, rc)
        if self.on_exit is not None:
            try:
                self.on_exit(handle)
            except Exception:  # pragma: no cover - observer must not kill the watcher
                log.exception("process-exit hook failed")

    # --------------------------------------------------------------- stopping

    def stop(self, handle: ProcessHandle, grace: float = 2.0) -> int:
        if handle.proc.poll() is None:
            handle._killed = False
            try:
                handle.proc.send_signal(signal.SIGTERM)
            except OSError:
                pass
            try:
                handle.proc.wait(timeout=grace)
            except subprocess.TimeoutExpired:
                handle._killed = True
                try:
                    handle.proc.kill()
                except OSError:
                    pass
                handle.proc.wait()
        rc = handle.proc.poll()
        handle.mark_exit(rc)
        return rc

    def shutdown(self, grace: float = 1.0) -> None:
        with self._lock:
            handles = list(self._handles)
        for handle in handles:
            self.stop(handle, grace=grace)

    def handles(self) -> list:
        with self._lock:
            return list(self._handles)

    def find(self, node_name: str):
        with self._lock:
            for handle in reversed(self._handles):
                if handle.node_name == node_name:
                    return handle
        return None
