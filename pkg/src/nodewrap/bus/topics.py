"""Topic name validation and normalization.

Absolute paths only: "/turtle1/cmd_vel". Relative input ("cmd_vel") is
normalized by prefixing "/". Segments are [A-Za-z0-9_]+; no trailing slash.
"""

from __future__ import annotations

import re

from ..errors import InvalidTopic

WRAP_PREFIX = "/__wrap/"

_SEGMENT = re.compile(r"^[A-Za-z0-9_]+$")


def normalize_topic(name: str) -> str:
    if not isinstance(name, str) or not name:
        raise InvalidTopic(f"invalid topic {name!r}")
    if not name.startswith("/"):
        name = "/" + name
    if name.endswith("/"):
        raise InvalidTopic(f"trailing slash in topic {name!r}")
    segments = name[1:].split("/")
    for seg in segments:
        if not _SEGMENT.match(seg):
            raise InvalidTopic(f"bad segment {seg!r} in topic {name!r}")
    return name


def is_reserved(topic: str) -> bool:
    return topic.startswith(WRAP_PREFIX)


def wrap_internal_name(wrapper: str, external: str) -> str:
    """The reserved internal name a wrapper uses for an intercepted external topic."""
    return WRAP_PREFIX + wrapper + normalize_topic(external)
