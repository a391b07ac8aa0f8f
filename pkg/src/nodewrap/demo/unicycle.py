"""Planar unicycle kinematics with exact constant-twist integration.

Under a constant command (v, w) the pose moves along a circular arc of
radius v/w (a straight line when w ~ 0), so one closed-form step of any dt
equals the limit of infinitely many Euler substeps: the integrator is
step-size independent and trajectories stay on the circle to float
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

STRAIGHT_OMEGA = 1e-9


def wrap_angle(theta: float) -> float:
    """Normalize into (-pi, pi]."""
    wrapped = math.remainder(theta, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True)
class UnicyclePose:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    linear_velocity: float = 0.0
    angular_velocity: float = 0.0

    def to_msg(self) -> dict:
        return {
            "x": self.x, "y": self.y, "theta": self.theta,
            "linear_velocity": self.linear_velocity,
            "angular_velocity": self.angular_velocity,
        }

    @staticmethod
    def from_msg(msg: dict) -> "UnicyclePose":
        return UnicyclePose(msg["x"], msg["y"], msg["theta"],
                            msg["linear_velocity"], msg["angular_velocity"])


def unicycle_step(pose: UnicyclePose, v: float, w: float, dt: float) -> UnicyclePose:
    """One exact constant-twist step of duration dt."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    for value in (pose.x, pose.y, pose.theta, v, w, dt):
        if not math.isfinite(value):
            raise ValueError("non-finite input to unicycle_step")
    theta_end = pose.theta + w * dt
    if abs(w) > STRAIGHT_OMEGA:
        radius = v / w
        x = pose.x + radius * (math.sin(theta_end) - math.sin(pose.theta))
        y = pose.y - radius * (math.cos(theta_end) - math.cos(pose.theta))
    else:
        x = pose.x + v * math.cos(pose.theta) * dt
        y = pose.y + v * math.sin(pose.theta) * dt
    return UnicyclePose(x, y, wrap_angle(theta_end), v, w)


def goal_controller(pose: UnicyclePose, goal: tuple, *, kv=1.0, kw=2.0, eps=0.05,
                    vmax=2.0, wmax=2.0) -> tuple:
    """Proportional point-goal controller: (v, w) toward goal, zero inside eps."""
    dx = goal[0] - pose.x
    dy = goal[1] - pose.y
    distance = math.hypot(dx, dy)
    if distance < eps:
        return 0.0, 0.0
    heading_error = wrap_angle(math.atan2(dy, dx) - pose.theta)
    w = min(max(kw * heading_error, -wmax), wmax)
    v = kv * distance if abs(heading_error) < math.pi / 2 else 0.0
    return min(v, vmax), w


def fit_circle(points) -> tuple:
    """Algebraic least-squares circle fit (Kasa): returns (cx, cy, radius).

    Solves the normal equations of x^2+y^2 + D x + E y + F = 0 directly;
    exact for points lying exactly on a circle.
    """
    n = len(points)
    if n < 3:
        raise ValueError("need at least 3 points to fit a circle")
    sx = sy = sxx = syy = sxy = sxz = syz = sz = 0.0
    for x, y in points:
        z = x * x + y * y
        sx += x
        sy += y
        sxx += x * x
        syy += y * y
        sxy += x * y
        sxz += x * z
        syz += y * z
        sz += z
    a = [[sxx, sxy, sx, sxz], [sxy, syy, sy, syz], [sx, sy, float(n), sz]]
    for col in range(3):
        pivot = max(range(col, 3), key=lambda r: abs(a[r][col]))
        a[col], a[pivot] = a[pivot], a[col]
        if a[col][col] == 0.0:
            raise ValueError("degenerate point set")
        for row in range(3):
            if row != col:
                factor = a[row][col] / a[col][col]
                a[row] = [rv - factor * cv for rv, cv in zip(a[row], a[col])]
    d = a[0][3] / a[0][0]
    e = a[1][3] / a[1][1]
    f = a[2][3] / a[2][2]
    cx, cy = d / 2.0, e / 2.0
    return cx, cy, math.sqrt(max(f + cx * cx + cy * cy, 0.0))


def radial_deviations(points, cx, cy, radius) -> list:
    return [abs(math.hypot(x - cx, y - cy) - radius) for x, y in points]


def hold_if_bad(pose: UnicyclePose, v: float, w: float, dt: float, log=None) -> UnicyclePose:
    """Step, but hold the pose (and log) on non-finite input — a node must not die."""
    try:
        return unicycle_step(pose, v, w, dt)
    except ValueError as exc:
        if log is not None:
            log.warning("holding pose: %s", exc)
        return replace(pose, linear_velocity=0.0, angular_velocity=0.0)
