"""JSON-over-WebSocket control API: the machine mirror of the shell.

Request frames: {"op": "...", "args": {...}, "id": any}. Every request gets
exactly one reply: {"id": ..., "ok": result} or {"id": ..., "error":
{"code", "name", "message"}}. Server-initiated events (graph-changed,
param-changed, process-exited, message-sample) are frames with an "event"
key. Malformed JSON earns an error frame; the connection stays open.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading

from websockets.asyncio.server import serve
from websockets.exceptions import ConnectionClosed

from ..errors import NodewrapError
from .hub import Hub

log = logging.getLogger(__name__)

DEFAULT_CONTROL_PORT = 11412
EVENT_QUEUE_LIMIT = 4096


class ControlApiServer:
    def __init__(self, hub: Hub, host="127.0.0.1", port=DEFAULT_CONTROL_PORT):
        self.hub = hub
        self.host = host
        self._requested_port = port
        self._loop = None
        self._server = None
        self._thread = None
        self._started = threading.Event()
        self._port = None
        self._connections = set()

    # ------------------------------------------------------------- lifecycle

    def start(self) -> "ControlApiServer":
        self._thread = threading.Thread(target=self._run, name="control-api", daemon=True)
        self._thread.start()
        if not self._started.wait(timeout=10):
            raise RuntimeError("control API failed to start")
        return self

    def stop(self) -> None:
        loop = self._loop
        if loop is not None and self._server is not None:
            loop.call_soon_threadsafe(self._server.close)
        if self._thread is not None:
            self._thread.join(timeout=5)

    @property
    def port(self) -> int:
        return self._port

    @property
    def uri(self) -> str:
        return f"ws://{self.host}:{self.port}"

    # --------------------------------------------------------------- serving

    def _run(self):
        asyncio.run(self._amain())

    async def _amain(self):
        self._loop = asyncio.get_running_loop()
        async with serve(self._handler, self.host, self._requested_port) as server:
            self._server = server
            self._port = next(iter(server.sockets)).getsockname()[1]
            self._started.set()
            await server.wait_closed()

    async def _handler(self, ws):
        events: asyncio.Queue = asyncio.Queue(maxsize=EVENT_QUEUE_LIMIT)
        loop = asyncio.get_running_loop()

        def sink(event):
            def push():
                if events.full():  # drop-oldest: a slow console must not stall the hub
                    try:
                        events.get_nowait()
                    except asyncio.QueueEmpty:
                        pass
                events.put_nowait(event)

            loop.call_soon_threadsafe(push)

        self.hub.add_event_sink(sink)
        self._connections.add(ws)
        pusher = asyncio.create_task(self._push_events(ws, events))
        try:
            async for raw in ws:
                await self._handle_frame(ws, raw)
        except ConnectionClosed:
            pass
        finally:
            self.hub.remove_event_sink(sink)
            self._connections.discard(ws)
            pusher.cancel()

    async def _push_events(self, ws, events):
        try:
            while True:
                event = await events.get()
                await ws.send(json.dumps(event))
        except (ConnectionClosed, asyncio.CancelledError):
            pass

    async def _handle_frame(self, ws, raw):
        try:
            frame = json.loads(raw)
            if not isinstance(frame, dict):
                raise ValueError("frame must be an object")
        except (json.JSONDecodeError, UnicodeDecodeError, ValueError) as exc:
            await ws.send(json.dumps({"id": None, "error": {
                "code": 0, "name": "MalformedFrame", "message": str(exc)}}))
            return
        request_id = frame.get("id")
        op = frame.get("op")
        args = frame.get("args") or {}
        if not isinstance(op, str) or not isinstance(args, dict):
            await ws.send(json.dumps({"id": request_id, "error": {
                "code": 0, "name": "MalformedFrame", "message": "need op:str and args:object"}}))
            return
        loop = asyncio.get_running_loop()
        try:
            result = await loop.run_in_executor(None, self.hub.execute, op, args)
            reply = {"id": request_id, "ok": result}
        except NodewrapError as exc:
            reply = {"id": request_id, "error": {
                "code": exc.code, "name": type(exc).__name__, "message": str(exc)}}
        except Exception as exc:  # noqa: BLE001 - API must stay up
            log.exception("op %s failed unexpectedly", op)
            reply = {"id": request_id, "error": {
                "code": 1, "name": "InternalError", "message": repr(exc)}}
        try:
            await ws.send(json.dumps(reply))
        except (ConnectionClosed, TypeError) as exc:
            if isinstance(exc, TypeError):  # non-JSON-able result is a server bug
                await ws.send(json.dumps({"id": request_id, "error": {
                    "code": 1, "name": "InternalError", "message": f"unserializable result: {exc}"}}))
