"""Scalable simulation clock.

All node-side timing (timers, sim stepping, command timeouts) runs against a
SimClock so experiments can run faster than wall time without changing any
counted or measured quantity. Scale 1.0 is real time. Children inherit the
scale through NW_TIME_SCALE.
"""

from __future__ import annotations

import os
import time

ENV_TIME_SCALE = "NW_TIME_SCALE"


class SimClock:
    def __init__(self, scale: float = 1.0):
        if scale <= 0:
            raise ValueError("time scale must be positive")
        self.scale = float(scale)
        self._t0 = time.monotonic()

    def now(self) -> float:
        """Simulation seconds since this clock was created."""
        return (time.monotonic() - self._t0) * self.scale

    def sleep_until(self, t_sim: float, stop_event=None) -> bool:
        """Sleep until sim time t_sim; returns False if stop_event fired first."""
        while True:
            dt_wall = (t_sim - self.now()) / self.scale
            if dt_wall <= 0:
                return True
            chunk = min(dt_wall, 0.05)
            if stop_event is not None:
                if stop_event.wait(chunk):
                    return False
            else:
                time.sleep(chunk)

    def sleep(self, dt_sim: float, stop_event=None) -> bool:
        return self.sleep_until(self.now() + dt_sim, stop_event)


def scale_from_env(default: float = 1.0) -> float:
    raw = os.environ.get(ENV_TIME_SCALE)
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        return default
