from .unicycle import (
    UnicyclePose,
    fit_circle,
    goal_controller,
    radial_deviations,
    unicycle_step,
    wrap_angle,
)

__all__ = [
    "UnicyclePose",
    "fit_circle",
    "goal_controller",
    "radial_deviations",
    "unicycle_step",
    "wrap_angle",
]
