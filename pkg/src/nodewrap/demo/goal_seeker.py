"""Goal-seeking planner node: a desk-scale move_base stand-in.

Subscribes /move_base_simple/goal (PoseStamped) and /tf (TFMessage, the
odom->base_link transform carries the robot pose), publishes velocity
commands on /cmd_vel at a fixed rate plus /move_base/current_goal and
/move_base/goal echoes whenever the goal changes. Commands flow only after
the first goal arrives.
"""

from __future__ import annotations

import logging
import threading

from .runner import connect, make_clock, standard_parser, stop_event_on_sigterm
from .unicycle import UnicyclePose, goal_controller

log = logging.getLogger("goal_seeker")


def main(argv=None):
    parser = standard_parser("goal-seeking velocity planner")
    parser.add_argument("--rate", type=float, default=20.0, help="command rate in sim Hz")
    parser.add_argument("--kv", type=float, default=1.0)
    parser.add_argument("--kw", type=float, default=2.0)
    parser.add_argument("--eps", type=float, default=0.05)
    parser.add_argument("--vmax", type=float, default=2.0)
    parser.add_argument("--wmax", type=float, default=2.0)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    stop = stop_event_on_sigterm()
    clock = make_clock(args)
    client = connect(args, "move_base")

    state = {"goal": None, "pose": UnicyclePose()}
    lock = threading.Lock()
    cmd_pub = client.advertise("/cmd_vel", "Twist")
    current_goal_pub = client.advertise("/move_base/current_goal", "PoseStamped")
    goal_pub = client.advertise("/move_base/goal", "MoveBaseActionGoal")

    def on_goal(incoming):
        value = incoming.value()
        with lock:
            state["goal"] = (value["x"], value["y"])
        client.publish(current_goal_pub, value)
        client.publish(goal_pub, {"goal": value})
        log.info("new goal (%.2f, %.2f)", value["x"], value["y"])

    def on_tf(incoming):
        value = incoming.value()
        for tf in value["transforms"]:
            if tf["child"] == "base_link":
                with lock:
                    state["pose"] = UnicyclePose(tf["x"], tf["y"], tf["theta"])

    client.subscribe("/move_base_simple/goal", "PoseStamped", on_goal)
    client.subscribe("/tf", "TFMessage", on_tf)
    client.subscribe("/tf_static", "TFMessage", lambda incoming: None)

    period = 1.0 / args.rate
    tick = 0
    try:
        while not stop.is_set():
            tick += 1
            if not clock.sleep_until(tick * period, stop):
                break
            with lock:
                goal, pose = state["goal"], state["pose"]
            if goal is None:
                continue
            v, w = goal_controller(pose, goal, kv=args.kv, kw=args.kw, eps=args.eps,
                                   vmax=args.vmax, wmax=args.wmax)
            client.publish(cmd_pub, {
                "linear": {"x": v, "y": 0.0, "z": 0.0},
                "angular": {"x": 0.0, "y": 0.0, "z": w},
            })
    finally:
        client.close()


if __name__ == "__main__":
    main()
