import threading
import time

import pytest

from nodewrap.bus import BrokerClient, Router, normalize_snapshot, validate_snapshot
from nodewrap.bus.router import Payload
from nodewrap.errors import (
    AliasCollision,
    NameInUse,
    NotAdmin,
    ReservedPrefix,
    SchemaConflict,
    StaleHandle,
)
from nodewrap.serde import builtin_registry, twist

from routing_harness import RoutingWorkload


class _Sink:
    def notify(self):
        pass


@pytest.fixture
def router():
    return Router()


@pytest.fixture
def reg():
    return builtin_registry()


def wait_for(predicate, timeout=5.0, interval=0.005):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()


def test_advertise_appears_in_snapshot(router):
    s = router.attach("turtle_control_node", _Sink())
    router.advertise(s, "/turtle1/cmd_vel", "Twist")
    snap = router.snapshot()
    assert any(t["name"] == "/turtle1/cmd_vel" and t["schema"] == "Twist" for t in snap["topics"])
    node = next(n for n in snap["nodes"] if n["name"] == "turtle_control_node")
    assert {"topic": "/turtle1/cmd_vel", "schema": "Twist"} in node["publications"]


def test_advertise_idempotent(router):
    s = router.attach("n", _Sink())
    a = router.advertise(s, "/turtle1/cmd_vel", "Twist")
    b = router.advertise(s, "/turtle1/cmd_vel", "Twist")
    assert a == b


def test_advertise_schema_conflict(router):
    s = router.attach("n", _Sink())
    router.advertise(s, "/turtle1/cmd_vel", "Twist")
    with pytest.raises(SchemaConflict):
        router.advertise(s, "/turtle1/cmd_vel", "Pose")
    other = router.attach("m", _Sink())
    with pytest.raises(SchemaConflict):
        other_handle = router.advertise(other, "/turtle1/cmd_vel", "Pose")


def test_subscribe_late_binding(router):
    s = router.attach("n", _Sink())
    handle = router.subscribe(s, "/nobody/publishes", "Pose")
    assert handle > 0
    sub = s.subs[handle]
    assert len(sub.queue) == 0


def test_publish_zero_subscribers(router):
    s = router.attach("n", _Sink())
    h = router.advertise(s, "/t", "Twist")
    assert router.publish(s, h, Payload.from_bytes(b"\x00" * 48)) == 1
    assert router.publish(s, h, Payload.from_bytes(b"\x00" * 48)) == 2


def test_name_in_use(router):
    router.attach("n", _Sink())
    with pytest.raises(NameInUse):
        router.attach("n", _Sink())


def test_fanout_fifo_brute_force():
    """3 publishers x 1000 messages x 5 subscribers: 15000 deliveries, per-publisher FIFO."""
    import struct

    router = Router(queue_capacity=1 << 20)
    pubs = []
    for i in range(3):
        s = router.attach(f"pub{i}", _Sink())
        pubs.append((i, s, router.advertise(s, "/load", "Twist")))
    subs = []
    for i in range(5):
        s = router.attach(f"sub{i}", _Sink())
        subs.append(s.subs[router.subscribe(s, "/load", None)])

    for n in range(1000):
        for i, s, h in pubs:
            router.publish(s, h, Payload.from_bytes(struct.pack("<II", i, n)))

    total = 0
    for sub in subs:
        last = {}
        count = 0
        while sub.queue:
            d = sub.queue.popleft()
            pub_id, n = struct.unpack("<II", d.payload.to_bytes())
            assert d.seq == n + 1, "broker seq must count per publisher"
            prev = last.get(pub_id, 0)
            assert d.seq > prev, "per-publisher FIFO violated"
            last[pub_id] = d.seq
            count += 1
        assert count == 3000
        total += count
    assert total == 15000


def test_raw_and_typed_subscribers_see_identical_bytes(reg):
    router = Router()
    received = {}

    pub = BrokerClient.local("p", router, registry=reg)
    typed = BrokerClient.local("typed", router, registry=reg)
    raw = BrokerClient.local("rawer", router, registry=reg)
    typed.subscribe("/t", "Twist", lambda m: received.setdefault("typed", m.bytes()))
    raw.subscribe("/t", None, lambda m: received.setdefault("raw", m.bytes()))
    h = pub.advertise("/t", "Twist")
    pub.publish(h, twist(linear_x=2.0, angular_z=1.8))
    assert wait_for(lambda: len(received) == 2)
    assert received["typed"] == received["raw"] == reg.encode("Twist", twist(linear_x=2.0, angular_z=1.8))
    for c in (pub, typed, raw):
        c.close()


def test_local_typed_path_skips_codec(router, monkeypatch):
    """In-process typed publisher to typed subscriber must not serialize."""
    reg = builtin_registry()
    calls = {"encode": 0}
    real_encode = reg.encode

    def counting_encode(name, value):
        calls["encode"] += 1
        return real_encode(name, value)

    monkeypatch.setattr(reg, "encode", counting_encode)
    got = []
    pub = BrokerClient.local("p", router, registry=reg)
    sub = BrokerClient.local("s", router, registry=reg)
    sub.subscribe("/t", "Twist", lambda m: got.append(m.value()))
    h = pub.advertise("/t", "Twist")
    pub.publish(h, twist(linear_x=1.0))
    assert wait_for(lambda: len(got) == 1)
    assert got[0]["linear"]["x"] == 1.0
    assert calls["encode"] == 0
    pub.close()
    sub.close()


def test_delivered_value_is_a_private_copy(router):
    reg = builtin_registry()
    seen = []
    pub = BrokerClient.local("p", router, registry=reg)
    a = BrokerClient.local("a", router, registry=reg)
    b = BrokerClient.local("b", router, registry=reg)

    def mutate(m):
        v = m.value()
        v["linear"]["x"] = 99.0
        seen.append(v["linear"]["x"])

    a.subscribe("/t", "Twist", mutate)
    b.subscribe("/t", "Twist", lambda m: seen.append(m.value()["linear"]["x"]))
    h = pub.advertise("/t", "Twist")
    pub.publish(h, twist(linear_x=1.0))
    assert wait_for(lambda: len(seen) == 2)
    assert sorted(seen) == [1.0, 99.0]
    for c in (pub, a, b):
        c.close()


def test_alias_reroutes_publisher(router):
    base = router.attach("move_base", _Sink())
    admin = router.attach("wrapper", _Sink(), admin=True)
    ext_sub = router.attach("listener", _Sink())

    h = router.advertise(base, "/cmd_vel", "Twist")
    sub_ext = ext_sub.subs[router.subscribe(ext_sub, "/cmd_vel", None)]

    router.publish(base, h, Payload.from_bytes(b"a"))
    router.set_alias(admin, "move_base", "/cmd_vel", "/__wrap/experimental_move_base/cmd_vel")
    router.publish(base, h, Payload.from_bytes(b"b"))

    assert [d.payload.to_bytes() for d in sub_ext.queue] == [b"a"]
    snap = router.snapshot()
    node = next(n for n in snap["nodes"] if n["name"] == "move_base")
    assert node["publications"] == [
        {"topic": "/__wrap/experimental_move_base/cmd_vel", "schema": "Twist"}
    ]


def test_alias_set_then_clear_is_gap_free_by_seq(router):
    base = router.attach("b", _Sink())
    admin = router.attach("w", _Sink(), admin=True)
    watcher = router.attach("x", _Sink(), admin=True)
    h = router.advertise(base, "/data", "Twist")
    ext = watcher.subs[router.subscribe(watcher, "/data", None)]
    internal = watcher.subs[router.subscribe(watcher, "/__wrap/b/data", None)]

    seqs = []
    for phase in range(3):
        if phase == 1:
            router.set_alias(admin, "b", "/data", "/__wrap/b/data")
        if phase == 2:
            router.clear_alias(admin, "b", "/data")
        for _ in range(10):
            router.publish(base, h, Payload.from_bytes(b""))

    union = sorted(d.seq for q in (ext.queue, internal.queue) for d in q)
    assert union == list(range(1, 31)), "union across routes must be gap- and duplication-free"
    assert [d.seq for d in ext.queue] == list(range(1, 11)) + list(range(21, 31))
    assert [d.seq for d in internal.queue] == list(range(11, 21))


def test_alias_injectivity(router):
    router.attach("b", _Sink())
    admin = router.attach("w", _Sink(), admin=True)
    router.set_alias(admin, "b", "/a", "/__wrap/b/shared")
    with pytest.raises(AliasCollision):
        router.set_alias(admin, "b", "/c", "/__wrap/b/shared")


def test_alias_requires_admin_and_reserved_prefix(router):
    router.attach("b", _Sink())
    plain = router.attach("p", _Sink())
    admin = router.attach("w", _Sink(), admin=True)
    with pytest.raises(NotAdmin):
        router.set_alias(plain, "b", "/a", "/__wrap/b/a")
    with pytest.raises(ReservedPrefix):
        router.set_alias(admin, "b", "/a", "/not_wrap/a")
    from nodewrap.errors import NoSuchNode

    with pytest.raises(NoSuchNode):
        router.set_alias(admin, "ghost", "/a", "/__wrap/g/a")


def test_reserved_namespace_blocked_for_non_admin(router):
    s = router.attach("n", _Sink())
    with pytest.raises(ReservedPrefix):
        router.advertise(s, "/__wrap/n/t", "Twist")
    with pytest.raises(ReservedPrefix):
        router.subscribe(s, "/__wrap/n/t", None)
    a = router.attach("adminy", _Sink(), admin=True)
    assert router.advertise(a, "/__wrap/n/t", "Twist") > 0


def test_empty_snapshot(router):
    snap = router.snapshot()
    assert snap["nodes"] == [] and snap["topics"] == [] and snap["aliases"] == []
    validate_snapshot(snap)


def test_stop_releases_topics(router):
    s = router.attach("n", _Sink())
    router.advertise(s, "/solo", "Twist")
    assert any(t["name"] == "/solo" for t in router.snapshot()["topics"])
    router.detach(s)
    snap = router.snapshot()
    assert not any(t["name"] == "/solo" for t in snap["topics"])
    assert not any(n["name"] == "n" for n in snap["nodes"])


def test_backpressure_drop_oldest():
    router = Router(queue_capacity=16)
    p = router.attach("p", _Sink())
    s = router.attach("s", _Sink())
    h = router.advertise(p, "/t", "Twist")
    sub = s.subs[router.subscribe(s, "/t", None)]
    for _ in range(40):
        router.publish(p, h, Payload.from_bytes(b""))
    assert len(sub.queue) == 16
    assert sub.drops == 24
    assert [d.seq for d in sub.queue] == list(range(25, 41)), "oldest messages dropped first"
    node = next(n for n in router.snapshot()["nodes"] if n["name"] == "s")
    assert node["subscriptions"][0]["drops"] == 24


def test_stale_handle(router):
    s = router.attach("n", _Sink())
    h = router.advertise(s, "/t", "Twist")
    router.remove_endpoint(s, h)
    with pytest.raises(StaleHandle):
        router.publish(s, h, Payload.from_bytes(b""))
    with pytest.raises(StaleHandle):
        router.remove_endpoint(s, h)


def test_routing_matches_brute_force_oracle_small():
    workload = RoutingWorkload(seed=7)
    mismatches = workload.run(5000)
    assert workload.publishes > 2000
    assert mismatches == []


def test_exactly_once_and_fifo_over_workload():
    workload = RoutingWorkload(seed=11)
    workload.run(4000)
    seen = set()
    for marker, session, topic, seq in workload.deliveries:
        key = (marker, session, topic, seq)
        assert key not in seen, "duplicate delivery"
        seen.add(key)


def test_snapshot_consistency_under_load(router):
    reg = builtin_registry()
    stop = threading.Event()
    errors = []

    def churn():
        try:
            pub = BrokerClient.local("churner", router, registry=reg)
            h = pub.advertise("/busy", "Twist")
            i = 0
            while not stop.is_set():
                pub.publish(h, twist(linear_x=float(i % 7)))
                if i % 500 == 0:
                    extra = pub.advertise(f"/side{i}", "Pose")
                    pub.unsubscribe  # noqa: B018 - attribute touch keeps linters honest
                i += 1
            pub.close()
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    listeners = [BrokerClient.local(f"l{i}", router, registry=reg) for i in range(3)]
    for c in listeners:
        c.subscribe("/busy", "Twist", lambda m: None)
    worker = threading.Thread(target=churn, daemon=True)
    worker.start()
    try:
        for _ in range(200):
            validate_snapshot(router.snapshot())
    finally:
        stop.set()
        worker.join(timeout=5)
        for c in listeners:
            c.close()
    assert not errors


def test_alias_atomicity_under_concurrent_publishing():
    """A numbered stream spanning live set_alias/clear_alias cutovers: the union
    of messages seen on the old and new routes has no gap and no duplicate."""
    import struct

    router = Router(queue_capacity=1 << 20)
    base = router.attach("base", _Sink())
    admin = router.attach("adm", _Sink(), admin=True)
    watch = router.attach("watch", _Sink(), admin=True)
    h = router.advertise(base, "/stream", "Twist")
    ext = watch.subs[router.subscribe(watch, "/stream", None)]
    internal = watch.subs[router.subscribe(watch, "/__wrap/base/stream", None)]

    n_messages = 20000
    done = threading.Event()

    def blast():
        for i in range(n_messages):
            router.publish(base, h, Payload.from_bytes(struct.pack("<I", i)))
        done.set()

    producer = threading.Thread(target=blast, daemon=True)
    producer.start()
    flips = 0
    while not done.is_set():
        router.set_alias(admin, "base", "/stream", "/__wrap/base/stream")
        router.clear_alias(admin, "base", "/stream")
        flips += 1
    producer.join()

    numbers = []
    for q in (ext.queue, internal.queue):
        while q:
            numbers.append(struct.unpack("<I", q.popleft().payload.to_bytes())[0])
    numbers.sort()
    assert numbers == list(range(n_messages))
    assert flips > 0


def test_normalize_snapshot_strips_volatile(router):
    s = router.attach("n", _Sink(), pid=4242)
    router.advertise(s, "/t", "Twist")
    norm = normalize_snapshot(router.snapshot())
    assert "pid" not in norm["nodes"][0]
    assert "version" not in norm
