"""Turtle simulator node: drives a unicycle from velocity commands.

Subscribes /turtle1/cmd_vel (Twist), integrates at 100 Hz sim time with the
exact arc integrator, publishes /turtle1/pose (Pose) at 10 Hz. Velocity
zeroes when no command has arrived for 1 s, like the reference simulator.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import replace

from .runner import connect, make_clock, standard_parser, stop_event_on_sigterm
from .unicycle import UnicyclePose, hold_if_bad

log = logging.getLogger("turtle_sim")


def main(argv=None):
    parser = standard_parser("turtlesim-like unicycle simulator")
    parser.add_argument("--cmd-topic", default="/turtle1/cmd_vel")
    parser.add_argument("--pose-topic", default="/turtle1/pose")
    parser.add_argument("--start-x", type=float, default=0.0)
    parser.add_argument("--start-y", type=float, default=0.0)
    parser.add_argument("--start-theta", type=float, default=0.0)
    parser.add_argument("--sim-rate", type=float, default=100.0)
    parser.add_argument("--pose-rate", type=float, default=10.0)
    parser.add_argument("--cmd-timeout", type=float, default=1.0)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    stop = stop_event_on_sigterm()
    clock = make_clock(args)
    client = connect(args, "turtle_sim")

    state = {"v": 0.0, "w": 0.0, "stamp": None}
    lock = threading.Lock()

    def on_cmd(incoming):
        value = incoming.value()
        with lock:
            state["v"] = value["linear"]["x"]
            state["w"] = value["angular"]["z"]
            state["stamp"] = clock.now()

    client.subscribe(args.cmd_topic, "Twist", on_cmd)
    pose_pub = client.advertise(args.pose_topic, "Pose")

    pose = UnicyclePose(args.start_x, args.start_y, args.start_theta)
    dt = 1.0 / args.sim_rate
    pose_every = max(1, round(args.sim_rate / args.pose_rate))
    step = 0
    try:
        while not stop.is_set():
            step += 1
            step_end = step * dt
            if not clock.sleep_until(step_end, stop):
                break
            with lock:
                v, w, stamp = state["v"], state["w"], state["stamp"]
            if stamp is None or step_end - stamp > args.cmd_timeout:
                v = w = 0.0
            if v != 0.0 or w != 0.0:
                pose = hold_if_bad(pose, v, w, dt, log)
            elif pose.linear_velocity != 0.0 or pose.angular_velocity != 0.0:
                pose = replace(pose, linear_velocity=0.0, angular_velocity=0.0)
            if step % pose_every == 0:
                client.publish(pose_pub, pose.to_msg())
    finally:
        client.close()


if __name__ == "__main__":
    main()
