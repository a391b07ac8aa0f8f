"""Synchronous control-API client: the scenario scripts' only way in.

Everything the scenarios do — launches, wiring, pipeline swaps, parameter
changes, message observation — goes through the public WebSocket protocol,
so a scenario run doubles as an end-to-end exercise of the control surface.
"""

from __future__ import annotations

import itertools
import json
import queue
import threading

from websockets.sync.client import connect

from ..errors import NodewrapError, error_for_code


class ApiError(NodewrapError):
    def __init__(self, payload):
        self.payload = payload
        super().__init__(payload.get("message", "control API error"))


class ApiDriver:
    def __init__(self, uri: str, *, timeout=10.0):
        self.ws = connect(uri, open_timeout=timeout, close_timeout=2.0)
        self.timeout = timeout
        self._ids = itertools.count(1)
        self._replies: dict[int, queue.Queue] = {}
        self._events = queue.Queue()
        self._samples: dict[int, queue.Queue] = {}
        self._lock = threading.Lock()
        self._closed = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    # ------------------------------------------------------------- plumbing

    def _read_loop(self):
        try:
            for raw in self.ws:
                frame = json.loads(raw)
                if "event" in frame:
                    if frame["event"] == "message-sample":
                        q = self._samples.get(frame.get("sub"))
                        if q is not None:
                            q.put(frame)
                    self._events.put(frame)
                    continue
                q = self._replies.pop(frame.get("id"), None)
                if q is not None:
                    q.put(frame)
        except Exception:
            pass
        finally:
            self._closed.set()

    def request(self, op: str, args: dict | None = None) -> dict:
        request_id = next(self._ids)
        box: queue.Queue = queue.Queue(maxsize=1)
        self._replies[request_id] = box
        with self._lock:
            self.ws.send(json.dumps({"op": op, "args": args or {}, "id": request_id}))
        try:
            frame = box.get(timeout=self.timeout)
        except queue.Empty:
            raise NodewrapError(f"no reply to {op} within {self.timeout}s") from None
        if "error" in frame:
            err = frame["error"]
            raise error_for_code(err.get("code", 1), f"{op}: {err.get('message')}")
        return frame["ok"]

    def send_raw(self, text: str) -> None:
        with self._lock:
            self.ws.send(text)

    # --------------------------------------------------------------- samples

    def subscribe(self, topic: str, rate=None, *, meta=False) -> int:
        """Server-side sample subscription; rate=None means unlimited,
        meta=True omits message bodies (seq/ts/origin only)."""
        sub = self.request("topic.subscribe", {"topic": topic, "rate": rate,
                                               "meta": meta})["sub"]
        self._samples[sub] = queue.Queue()
        return sub

    def wait_graph(self, predicate, *, timeout=10.0, interval=0.03) -> dict:
        """Poll graph.get until predicate(graph) holds; returns the graph."""
        import time

        deadline = time.monotonic() + timeout
        while True:
            graph = self.request("graph.get")["graph"]
            if predicate(graph):
                return graph
            if time.monotonic() > deadline:
                raise NodewrapError("graph condition not met in time")
            time.sleep(interval)

    def unsubscribe(self, sub: int) -> None:
        self._samples.pop(sub, None)
        self.request("topic.unsubscribe", {"sub": sub})

    def samples(self, sub: int, n: int, *, timeout=30.0) -> list:
        """Collect the next n samples of a subscription."""
        q = self._samples[sub]
        out = []
        for _ in range(n):
            try:
                out.append(q.get(timeout=timeout))
            except queue.Empty:
                raise NodewrapError(
                    f"subscription {sub}: got {len(out)}/{n} samples before the "
                    f"{timeout}s timeout") from None
        return out

    def drain_samples(self, sub: int) -> list:
        q = self._samples[sub]
        out = []
        while True:
            try:
                out.append(q.get_nowait())
            except queue.Empty:
                return out

    def next_event(self, kind: str, *, timeout=10.0) -> dict:
        import time

        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise NodewrapError(f"no {kind} event within {timeout}s")
            event = self._events.get(timeout=remaining)
            if event.get("event") == kind:
                return event

    def close(self):
        try:
            self.ws.close()
        except Exception:
            pass
