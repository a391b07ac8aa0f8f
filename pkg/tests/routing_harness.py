"""Randomized routing workload checked against a brute-force mirror.

The mirror keeps its own tables (nodes, aliases, publications, subscriptions)
and computes each publish's expected recipient set by scanning them — the
subscription-table-compose-alias-resolution oracle. The router's actual
recipients are recovered from the unique payload each publish carries.
"""

from __future__ import annotations

import random
import struct

from nodewrap.bus.router import Payload, Router
from nodewrap.errors import NodewrapError


class _Sink:
    def notify(self):
        pass


class MirrorNode:
    def __init__(self, name):
        self.name = name
        self.aliases = {}
        self.pubs = {}   # topic -> (handle, schema); handle != None means live
        self.subs = {}   # topic -> (handle, schema_or_None)


class RoutingWorkload:
    def __init__(self, seed, *, nodes=6, topics=10, queue_capacity=1 << 20):
        self.rng = random.Random(seed)
        self.router = Router(queue_capacity=queue_capacity)
        self.topics = [f"/t{i}" for i in range(topics)]
        self.schemas = ["Twist", "Pose", "PoseStamped"]
        self.mirror: dict[str, MirrorNode] = {}
        self.sessions = {}
        self.counter = 0
        self.mismatches = []
        self.publishes = 0
        self.deliveries = []  # (marker, sub_session, sub_topic, seq)
        for i in range(nodes):
            name = f"n{i}"
            self.sessions[name] = self.router.attach(name, _Sink(), admin=True)
            self.mirror[name] = MirrorNode(name)

    # ------------------------------------------------------------- op steps

    def step(self):
        roll = self.rng.random()
        if roll < 0.10:
            self._op_advertise()
        elif roll < 0.20:
            self._op_subscribe()
        elif roll < 0.25:
            self._op_unsubscribe()
        elif roll < 0.30:
            self._op_alias()
        else:
            self._op_publish()

    def run(self, steps):
        for _ in range(steps):
            self.step()
        return self.mismatches

    def _pick_node(self):
        return self.rng.choice(sorted(self.mirror))

    def _pick_topic(self):
        return self.rng.choice(self.topics)

    def _op_advertise(self):
        node, topic = self._pick_node(), self._pick_topic()
        schema = self.rng.choice(self.schemas)
        m = self.mirror[node]
        try:
            handle = self.router.advertise(self.sessions[node], topic, schema)
        except NodewrapError:
            return
        m.pubs[topic] = (handle, schema)

    def _op_subscribe(self):
        node, topic = self._pick_node(), self._pick_topic()
        schema = self.rng.choice(self.schemas + [None])
        m = self.mirror[node]
        if topic in m.subs:
            return
        try:
            handle = self.router.subscribe(self.sessions[node], topic, schema)
        except NodewrapError:
            return
        m.subs[topic] = (handle, schema)

    def _op_unsubscribe(self):
        node = self._pick_node()
        m = self.mirror[node]
        if not m.subs:
            return
        topic = self.rng.choice(sorted(m.subs))
        handle, _ = m.subs.pop(topic)
        self.router.remove_endpoint(self.sessions[node], handle)

    def _op_alias(self):
        node, topic = self._pick_node(), self._pick_topic()
        m = self.mirror[node]
        if topic in m.aliases and self.rng.random() < 0.5:
            try:
                self.router.clear_alias(self.sessions[node], node, topic)
            except NodewrapError:
                return  # e.g. migration back onto a differently-pinned topic
            del m.aliases[topic]
            return
        internal = f"/__wrap/{node}{topic}"
        try:
            self.router.set_alias(self.sessions[node], node, topic, internal)
        except NodewrapError:
            return
        m.aliases[topic] = internal

    def _op_publish(self):
        node = self._pick_node()
        m = self.mirror[node]
        if not m.pubs:
            return
        topic = self.rng.choice(sorted(m.pubs))
        handle, _schema = m.pubs[topic]
        self.counter += 1
        marker = struct.pack("<Q", self.counter)
        seq = self.router.publish(self.sessions[node], handle, Payload.from_bytes(marker))
        self.publishes += 1
        expected = self._expected_recipients(node, topic)
        actual = self._collect(marker, seq)
        if actual != expected:
            self.mismatches.append((self.counter, node, topic, expected, actual))

    # ---------------------------------------------------------- oracle side

    def _expected_recipients(self, pub_node, pub_topic):
        """Brute-force: alias-resolve the publisher topic, then scan every subscription."""
        resolved_pub = self.mirror[pub_node].aliases.get(pub_topic, pub_topic)
        recipients = set()
        for node, m in self.mirror.items():
            for sub_topic, (handle, _schema) in m.subs.items():
                if m.aliases.get(sub_topic, sub_topic) == resolved_pub:
                    recipients.add((node, handle))
        return recipients

    def _collect(self, marker, seq):
        """Pop the router's actual deliveries of this publish out of the sub queues."""
        actual = set()
        for name, session in self.sessions.items():
            for sub in list(session.subs.values()):
                while sub.queue:
                    d = sub.queue.popleft()
                    if d.payload.to_bytes() == marker:
                        actual.add((name, sub.id))
                    self.deliveries.append((d.payload.to_bytes(), name, d.topic, d.seq))
        return actual
