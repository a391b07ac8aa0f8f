"""Live-tunable named scalars: the experiment's "global variable".

Reads and writes are linearizable behind one lock; each key carries a
monotone version so audits can count writes. Reading an unset key yields
0.0 and logs one warning per key.
"""

from __future__ import annotations

import logging
import threading

from ..errors import InvalidIdentifier
from ..serde.types import check_identifier

log = logging.getLogger(__name__)


class ParameterStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._values: dict[str, float] = {}
        self._versions: dict[str, int] = {}
        self._warned: set = set()
        self._listeners = []

    def set(self, name: str, value: float) -> int:
        check_identifier(name, "parameter name")
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise InvalidIdentifier(f"parameter value must be numeric, got {value!r}") from None
        with self._lock:
            self._values[name] = value
            version = self._versions.get(name, 0) + 1
            self._versions[name] = version
            listeners = list(self._listeners)
        for callback in listeners:
            callback(name, value, version)
        return version

    def get(self, name: str) -> float:
        with self._lock:
            if name in self._values:
                return self._values[name]
            missing = name not in self._warned
            if missing:
                self._warned.add(name)
        if missing:
            log.warning("parameter %r read before it was set; defaulting to 0.0", name)
        return 0.0

    def version(self, name: str) -> int:
        with self._lock:
            return self._versions.get(name, 0)

    def items(self) -> dict:
        with self._lock:
            return dict(self._values)

    def on_change(self, callback) -> None:
        """callback(name, value, version), fired outside the lock."""
        with self._lock:
            self._listeners.append(callback)
