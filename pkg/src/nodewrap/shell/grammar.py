"""Shell command grammar: one command per line, translated to (op, args).

The textual commands mirror the chained builder: `node NAME`, then
`reuse publish cmd_vel type Twist`, `new subscribe cmd_vel type Twist
pipeline relay_velocity`, `create` — the running system reshapes as you
type. Parse errors carry a caret position and never kill the session.
"""

from __future__ import annotations

import shlex

from ..errors import ParseError

HELP_TEXT = """\
commands (one per line):
  node NAME                                   declare or select a node
  base PACKAGE NODE                           set the selected node's base
  reuse publish TOPIC type SCHEMA             relay a base output through this node
  reuse subscribe TOPIC type SCHEMA [pipeline NAME]
  new publish TOPIC type SCHEMA               add a fresh output topic
  new subscribe TOPIC type SCHEMA pipeline NAME
  new subscribe TOPIC type raw pipeline NAME  undecoded (anyMsg) subscription
  replace TOPIC as TOPIC pipeline NAME        re-expose a base topic under a new name
  pipeline NAME { ... }                       define stages (multi-line until })
  timer PERIOD pipeline NAME                  periodic emitter on the selected node
  create | stop | unwrap                      lifecycle of the selected node
  write TOPIC SCHEMA{path := EXPR, ...}       publish from the selected node
  param set NAME VALUE                        tune a live parameter
  node list | node info NAME | node log NAME
  topic list | topic info TOPIC
  topic echo TOPIC [COUNT]                    stream messages (ctrl-c stops)
  topic pub TOPIC SCHEMA{...}                 publish a literal message
  model export NAME FILE | model import FILE
  run PACKAGE NODE [ARGS...]                  launch a package node standalone
  help
"""


class Command:
    """A parsed line: the (op, args) pair plus shell-side handling hints."""

    def __init__(self, op=None, args=None, *, kind="api", select=None, needs_node=False,
                 extra=None):
        self.op = op
        self.args = args or {}
        self.kind = kind          # api | noop | help | echo | model-export | model-import
        self.select = select      # node name this line selects
        self.needs_node = needs_node
        self.extra = extra or {}


def _caret_error(line, message, token_index, tokens):
    prefix = " ".join(tokens[:token_index])
    col = len(prefix) + (2 if prefix else 1)
    raise ParseError(message, 1, col)


def parse_command(text: str) -> Command:
    """Parse one complete command (a pipeline block arrives as one string)."""
    stripped = text.strip()
    if not stripped or stripped.startswith("#"):
        return Command(kind="noop")

    if stripped.startswith("pipeline"):
        head = stripped.split(None, 2)
        if len(head) < 3 or "{" not in stripped:
            raise ParseError("pipeline needs a name and a { ... } block", 1, len("pipeline") + 1)
        return Command("pipeline.define", {"text": stripped}, kind="api")

    try:
        tokens = shlex.split(stripped, comments=False, posix=True)
    except ValueError as exc:
        raise ParseError(str(exc), 1, 1) from None

    head = tokens[0]

    if head == "help":
        return Command("help", kind="api")

    if head == "node":
        if len(tokens) == 1:
            _caret_error(stripped, "node needs an argument", 1, tokens)
        if tokens[1] == "list":
            return Command("node.list")
        if tokens[1] == "info":
            _need(tokens, 3, "node info NAME")
            return Command("node.info", {"node": tokens[2]})
        if tokens[1] == "log":
            _need(tokens, 3, "node log NAME")
            return Command("node.log", {"node": tokens[2]})
        _need(tokens, 2, "node NAME")
        return Command("node.declare", {"name": tokens[1]}, select=tokens[1])

    if head == "base":
        _need(tokens, 3, "base PACKAGE NODE")
        return Command("node.base", {"package": tokens[1], "base_node": tokens[2]},
                       needs_node=True)

    if head in ("reuse", "new"):
        return _parse_endpoint(stripped, tokens)

    if head == "replace":
        _need(tokens, 6, "replace TOPIC as TOPIC pipeline NAME")
        if tokens[2] != "as" or tokens[4] != "pipeline":
            _caret_error(stripped, "expected: replace TOPIC as TOPIC pipeline NAME", 2, tokens)
        return Command("node.replace", {"from": tokens[1], "to": tokens[3],
                                        "pipeline": tokens[5]}, needs_node=True)

    if head == "timer":
        _need(tokens, 4, "timer PERIOD pipeline NAME")
        if tokens[2] != "pipeline":
            _caret_error(stripped, "expected: timer PERIOD pipeline NAME", 2, tokens)
        try:
            period = float(tokens[1])
        except ValueError:
            _caret_error(stripped, f"bad period {tokens[1]!r}", 1, tokens)
        return Command("node.timer.add", {"period": period, "pipeline": tokens[3]},
                       needs_node=True)

    if head == "create":
        return Command("node.create", needs_node=True)
    if head == "stop":
        if len(tokens) > 1:
            return Command("node.stop", {"node": tokens[1]})
        return Command("node.stop", needs_node=True)
    if head == "unwrap":
        return Command("node.unwrap", needs_node=True)

    if head == "write":
        _need(tokens, 3, "write TOPIC SCHEMA{...}")
        literal = stripped.split(None, 2)[2]
        return Command("node.write", {"topic": tokens[1], "literal": literal},
                       needs_node=True)

    if head == "param":
        if len(tokens) >= 2 and tokens[1] == "set":
            _need(tokens, 4, "param set NAME VALUE")
            try:
                value = float(tokens[3])
            except ValueError:
                _caret_error(stripped, f"bad value {tokens[3]!r}", 3, tokens)
            return Command("param.set", {"name": tokens[2], "value": value})
        if len(tokens) >= 2 and tokens[1] == "list":
            return Command("param.list")
        if len(tokens) >= 3 and tokens[1] == "get":
            return Command("param.get", {"name": tokens[2]})
        _caret_error(stripped, "expected: param set NAME VALUE", 1, tokens)

    if head == "topic":
        if len(tokens) == 1:
            _caret_error(stripped, "topic needs a subcommand", 1, tokens)
        sub = tokens[1]
        if sub == "list":
            return Command("topic.list")
        if sub == "info":
            _need(tokens, 3, "topic info TOPIC")
            return Command("topic.info", {"topic": tokens[2]})
        if sub == "echo":
            _need(tokens, 3, "topic echo TOPIC [COUNT]")
            count = None
            if len(tokens) > 3:
                try:
                    count = int(tokens[3])
                except ValueError:
                    _caret_error(stripped, f"bad count {tokens[3]!r}", 3, tokens)
            return Command(kind="echo", extra={"topic": tokens[2], "count": count})
        if sub == "pub":
            _need(tokens, 4, "topic pub TOPIC SCHEMA{...}")
            literal = stripped.split(None, 3)[3]
            return Command("topic.pub", {"topic": tokens[2], "literal": literal})
        _caret_error(stripped, f"unknown topic subcommand {sub!r}", 1, tokens)

    if head == "model":
        if len(tokens) >= 2 and tokens[1] == "export":
            _need(tokens, 4, "model export NAME FILE")
            return Command("model.export", {"node": tokens[2]}, kind="model-export",
                           extra={"file": tokens[3]})
        if len(tokens) >= 2 and tokens[1] == "import":
            _need(tokens, 3, "model import FILE")
            return Command("model.import", kind="model-import", extra={"file": tokens[2]})
        _caret_error(stripped, "expected: model export NAME FILE | model import FILE", 1, tokens)

    if head == "run":
        _need(tokens, 3, "run PACKAGE NODE [ARGS...]")
        return Command("process.run", {"package": tokens[1], "pkg_node": tokens[2],
                                       "args": tokens[3:]})

    _caret_error(stripped, f"unknown command {head!r} (try `help`)", 0, tokens)


def _parse_endpoint(line, tokens) -> Command:
    set_name = tokens[0]
    _need(tokens, 2, f"{set_name} publish|subscribe TOPIC type SCHEMA")
    direction = tokens[1]
    if direction not in ("publish", "subscribe"):
        _caret_error(line, f"expected publish or subscribe after {set_name!r}", 1, tokens)
    _need(tokens, 5, f"{set_name} {direction} TOPIC type SCHEMA")
    if tokens[3] != "type":
        _caret_error(line, "expected `type SCHEMA`", 3, tokens)
    schema = None if tokens[4] == "raw" else tokens[4]
    args = {"set": set_name, "direction": direction, "topic": tokens[2], "schema": schema}
    rest = tokens[5:]
    if rest:
        if len(rest) != 2 or rest[0] != "pipeline":
            _caret_error(line, "expected `pipeline NAME`", 5, tokens)
        args["pipeline"] = rest[1]
    return Command("node.endpoint.add", args, needs_node=True)


def _need(tokens, count, usage):
    if len(tokens) < count:
        raise ParseError(f"expected: {usage}", 1, len(" ".join(tokens)) + 1)
