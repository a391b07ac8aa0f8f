"""Actuator driver node: the motor end of the demo robot.

Subscribes /mobile_base/commands/velocity (Twist), integrates the platform
pose at 100 Hz sim time and reports it on /odom (Pose) at 10 Hz. This is the
node the safety scenario wraps: whatever reaches its input is what the
"hardware" does.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import replace

from .runner import connect, make_clock, standard_parser, stop_event_on_sigterm
from .unicycle import UnicyclePose, hold_if_bad

log = logging.getLogger("actuator_driver")


def main(argv=None):
    parser = standard_parser("differential-drive actuator driver")
    parser.add_argument("--cmd-topic", default="/mobile_base/commands/velocity")
    parser.add_argument("--odom-topic", default="/odom")
    parser.add_argument("--sim-rate", type=float, default=100.0)
    parser.add_argument("--odom-rate", type=float, default=10.0)
    parser.add_argument("--cmd-timeout", type=float, default=1.0)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    stop = stop_event_on_sigterm()
    clock = make_clock(args)
    client = connect(args, "actuator_driver")

    state = {"v": 0.0, "w": 0.0, "stamp": None}
    lock = threading.Lock()

    def on_cmd(incoming):
        value = incoming.value()
        with lock:
            state["v"] = value["linear"]["x"]
            state["w"] = value["angular"]["z"]
            state["stamp"] = clock.now()

    client.subscribe(args.cmd_topic, "Twist", on_cmd)
    odom_pub = client.advertise(args.odom_topic, "Pose")

    pose = UnicyclePose()
    dt = 1.0 / args.sim_rate
    odom_every = max(1, round(args.sim_rate / args.odom_rate))
    step = 0
    try:
        while not stop.is_set():
            step += 1
            if not clock.sleep_until(step * dt, stop):
                break
            with lock:
                v, w, stamp = state["v"], state["w"], state["stamp"]
            if stamp is None or step * dt - stamp > args.cmd_timeout:
                v = w = 0.0
            if v != 0.0 or w != 0.0:
                pose = hold_if_bad(pose, v, w, dt, log)
            elif pose.linear_velocity != 0.0 or pose.angular_velocity != 0.0:
                pose = replace(pose, linear_velocity=0.0, angular_velocity=0.0)
            if step % odom_every == 0:
                client.publish(odom_pub, pose.to_msg())
    finally:
        client.close()


if __name__ == "__main__":
    main()
