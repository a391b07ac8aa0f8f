"""Interactive shell: reads commands, drives the hub, renders results.

No input is fatal: parse errors print a caret, command errors print their
message, the session keeps going either way.
"""

from __future__ import annotations

import json
import queue
import sys

from ..errors import NodewrapError, ParseError
from .grammar import parse_command
from .hub import Hub

PROMPT = "nw> "
CONT_PROMPT = "...> "


class ReplSession:
    def __init__(self, hub: Hub, *, out=None, echo_idle=None):
        self.hub = hub
        self.out = out or sys.stdout
        self.current_node = None
        # when set, an uncounted `topic echo` gives up after this many idle
        # seconds instead of waiting for ctrl-c (scripted/fuzzed sessions)
        self.echo_idle = echo_idle

    # -------------------------------------------------------------- evaluate

    def eval(self, text: str) -> str:
        """Execute exactly one command; returns the rendered output text."""
        try:
            command = parse_command(text)
        except ParseError as exc:
            return self._render_parse_error(text, exc)
        except Exception as exc:  # tokenizer corner cases must not kill the shell
            return f"error: {exc}"

        if command.kind == "noop":
            return ""
        try:
            if command.kind == "echo":
                return self._echo(command.extra["topic"], command.extra["count"])
            if command.kind == "model-export":
                return self._model_export(command)
            if command.kind == "model-import":
                return self._model_import(command)
            if command.needs_node:
                if self.current_node is None:
                    return "error: no node selected (use `node NAME` first)"
                command.args.setdefault("node", self.current_node)
            result = self.hub.execute(command.op, command.args)
            if command.select:
                self.current_node = command.select
            return self._render(command.op, result)
        except NodewrapError as exc:
            return f"error: {exc}"
        except Exception as exc:  # noqa: BLE001 - the session must survive anything
            return f"internal error: {exc!r}"

    # -------------------------------------------------------------- rendering

    def _render(self, op, result) -> str:
        if op == "help":
            return result["help"]
        if op == "node.list":
            return "\n".join(f"{n['name']}  [{n['state']}]" for n in result["nodes"])
        if op == "topic.list":
            lines = []
            for t in result["topics"]:
                lines.append(f"{t['name']}  {t['schema'] or 'raw'}  "
                             f"pubs={len(t['publishers'])} subs={len(t['subscribers'])}")
            return "\n".join(lines)
        if op in ("node.info", "topic.info", "param.list", "graph.get"):
            return json.dumps(result, indent=2, sort_keys=True)
        if op == "node.log":
            return result["log"] or "(no output captured)"
        if op == "param.set":
            return f"{result['name']} set (version {result['version']})"
        if op in ("pipeline.define", "node.endpoint.add"):
            return "ok"
        if op == "node.timer.add":
            return f"timer {result['timer']} added"
        if op == "node.declare":
            return f"node {result['name']} [{result['state']}] selected"
        if op == "node.create":
            return f"node {result['name']} running"
        if op == "process.run":
            return f"launched {result['node']} (pid {result['pid']})"
        if op == "model.import":
            return "imported: " + ", ".join(result["nodes"])
        if not result:
            return "ok"
        return json.dumps(result, sort_keys=True)

    def _render_parse_error(self, text, exc: ParseError) -> str:
        line = text.splitlines()[0] if text.splitlines() else ""
        caret = " " * (max((exc.col or 1) - 1, 0)) + "^"
        return f"parse error: {exc.args[0]}\n  {line}\n  {caret}"

    # -------------------------------------------------------------- specials

    def _echo(self, topic, count) -> str:
        """Stream decoded messages until interrupted (or COUNT messages)."""
        sub = self.hub.execute("topic.subscribe", {"topic": topic, "rate": None})["sub"]
        received = queue.Queue()

        def sink(event):
            if event.get("event") == "message-sample" and event.get("sub") == sub:
                received.put(event)

        self.hub.add_event_sink(sink)
        lines = []
        try:
            remaining = count if count is not None else float("inf")
            idle = 0.0
            while remaining > 0:
                try:
                    event = received.get(timeout=0.25)
                    idle = 0.0
                except queue.Empty:
                    if count is None:
                        idle += 0.25
                        if self.echo_idle is not None and idle >= self.echo_idle:
                            break
                        continue
                    break
                lines.append(render_sample(event))
                if count is not None:
                    remaining -= 1
        except KeyboardInterrupt:
            pass
        finally:
            self.hub.remove_event_sink(sink)
            self.hub.execute("topic.unsubscribe", {"sub": sub})
        return "\n".join(lines)

    def _model_export(self, command) -> str:
        from .model import document_to_json

        result = self.hub.execute("model.export", command.args)
        path = command.extra["file"]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(document_to_json(result["document"]))
        return f"exported to {path}"

    def _model_import(self, command) -> str:
        from .model import document_from_json

        path = command.extra["file"]
        with open(path, encoding="utf-8") as fh:
            document = document_from_json(fh.read())
        result = self.hub.execute("model.import", {"document": document})
        return "imported: " + ", ".join(result["nodes"])

    # -------------------------------------------------------------- main loop

    def run(self, stdin=None) -> None:
        stdin = stdin or sys.stdin
        buffer = ""
        depth = 0
        while True:
            try:
                prompt = CONT_PROMPT if depth > 0 else PROMPT
                line = input(prompt) if stdin is sys.stdin else stdin.readline()
                if stdin is not sys.stdin:
                    if not line:
                        break
                    line = line.rstrip("\n")
            except EOFError:
                break
            except KeyboardInterrupt:
                print(file=self.out)
                buffer, depth = "", 0
                continue
            buffer = f"{buffer}\n{line}" if buffer else line
            depth = buffer.count("{") - buffer.count("}")
            if depth > 0:
                continue
            text, buffer, depth = buffer, "", 0
            output = self.eval(text)
            if output:
                print(output, file=self.out)


def render_sample(event) -> str:
    schema = event.get("schema") or "raw"
    if "value" in event:
        body = _render_value(schema, event["value"])
    else:
        body = f"<{len(event.get('payload_b64', ''))} b64 bytes>"
    origin = ""
    if event.get("origin"):
        origin = f"  (from {event['origin'][0]}#{event['origin'][1]})"
    return f"[{event['topic']} seq={event['seq']}] {body}{origin}"


def _render_value(schema, value) -> str:
    parts = []

    def walk(prefix, node):
        if isinstance(node, dict):
            for key, item in node.items():
                walk(f"{prefix}.{key}" if prefix else key, item)
        elif isinstance(node, list):
            for i, item in enumerate(node):
                walk(f"{prefix}.{i}", item)
        else:
            if isinstance(node, float):
                node = repr(node)
            parts.append(f"{prefix}: {node}")

    walk("", value)
    return f"{schema}{{{', '.join(parts)}}}"
