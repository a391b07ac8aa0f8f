import socket
import struct
import time

import pytest

from nodewrap.bus import BrokerClient, BrokerServer, wire
from nodewrap.errors import BrokerUnreachable, NameInUse, SchemaConflict
from nodewrap.serde import builtin_registry, twist

from test_router import wait_for


@pytest.fixture
def server():
    srv = BrokerServer(port=0, keepalive_interval=0.5, keepalive_timeout=2.0).start()
    yield srv
    srv.stop()


def test_connect_publish_deliver(server):
    reg = builtin_registry()
    got = []
    pub = BrokerClient.connect("p", server.uri, registry=reg)
    sub = BrokerClient.connect("s", server.uri, registry=reg)
    sub.subscribe("/turtle1/cmd_vel", "Twist", lambda m: got.append((m.seq, m.value())))
    h = pub.advertise("/turtle1/cmd_vel", "Twist")
    seq = pub.publish(h, twist(linear_x=2.0, angular_z=1.8))
    assert seq == 1
    assert wait_for(lambda: len(got) == 1)
    assert got[0][0] == 1
    assert got[0][1]["linear"]["x"] == 2.0 and got[0][1]["angular"]["z"] == 1.8
    pub.close()
    sub.close()


def test_predicted_seq_matches_broker(server):
    got = []
    pub = BrokerClient.connect("p", server.uri)
    sub = BrokerClient.connect("s", server.uri)
    sub.subscribe("/t", None, lambda m: got.append(m.seq))
    h = pub.advertise("/t", "Twist")
    predicted = [pub.publish(h, twist()) for _ in range(50)]
    assert wait_for(lambda: len(got) == 50)
    assert got == predicted == list(range(1, 51))
    pub.close()
    sub.close()


def test_fifo_order_across_tcp(server):
    got = []
    pub = BrokerClient.connect("p", server.uri)
    sub = BrokerClient.connect("s", server.uri)
    sub.subscribe("/t", None, lambda m: got.append(struct.unpack("<I", m.bytes())[0]))
    h = pub.advertise("/t", "Twist")
    for i in range(500):
        pub.publish(h, data=struct.pack("<I", i))
    assert wait_for(lambda: len(got) == 500)
    assert got == list(range(500))
    pub.close()
    sub.close()


def test_duplicate_node_name_rejected(server):
    a = BrokerClient.connect("same", server.uri)
    with pytest.raises(NameInUse):
        BrokerClient.connect("same", server.uri)
    a.close()


def test_schema_conflict_over_wire(server):
    a = BrokerClient.connect("a", server.uri)
    a.advertise("/t", "Twist")
    b = BrokerClient.connect("b", server.uri)
    with pytest.raises(SchemaConflict):
        b.advertise("/t", "Pose")
    with pytest.raises(SchemaConflict):
        b.subscribe("/t", "Pose", lambda m: None)
    a.close()
    b.close()


def test_snapshot_over_wire(server):
    a = BrokerClient.connect("a", server.uri, pid=111)
    a.advertise("/t", "Twist")
    snap = a.snapshot()
    node = next(n for n in snap["nodes"] if n["name"] == "a")
    assert node["pid"] == 111
    assert node["publications"] == [{"topic": "/t", "schema": "Twist"}]
    a.close()


def test_alias_over_wire_and_hello_aliases(server):
    # base announces its own alias table at HELLO (the launch-mode path)
    base = BrokerClient.connect("base", server.uri, aliases=[("/cmd_vel", "/__wrap/w/cmd_vel")])
    watcher = BrokerClient.connect("w", server.uri, admin=True)
    got = []
    watcher.subscribe("/__wrap/w/cmd_vel", None, lambda m: got.append(m.bytes()))
    h = base.advertise("/cmd_vel", "Twist")
    base.publish(h, data=b"\x00" * 48)
    assert wait_for(lambda: len(got) == 1)

    # attach-mode alias set over the wire
    watcher.set_alias("base", "/other", "/__wrap/w/other")
    snap = watcher.snapshot()
    assert {"node": "base", "external": "/other", "internal": "/__wrap/w/other"} in snap["aliases"]
    watcher.clear_alias("base", "/other")
    snap = watcher.snapshot()
    assert not any(a["external"] == "/other" for a in snap["aliases"])
    base.close()
    watcher.close()


def test_async_publish_error_does_not_kill_session(server):
    errors = []
    a = BrokerClient.connect("a", server.uri)
    a.on_async_error = lambda code, msg: errors.append((code, msg))
    h = a.advertise("/t", "Twist")
    a.unsubscribe(h)  # removes the publication endpoint
    a.publish(h, data=b"")  # stale handle: async error, connection stays up
    assert wait_for(lambda: len(errors) == 1)
    assert a.snapshot() is not None  # still responsive
    a.close()


def test_keepalive_reaps_silent_session(server):
    # a bare socket that HELLOs then never answers pings
    sock = socket.create_connection(("127.0.0.1", server.port))
    sock.sendall(wire.hello("zombie"))
    assert wait_for(lambda: any(n["name"] == "zombie" for n in server.router.snapshot()["nodes"]))
    deadline = time.monotonic() + 6.0
    gone = False
    while time.monotonic() < deadline:
        if not any(n["name"] == "zombie" for n in server.router.snapshot()["nodes"]):
            gone = True
            break
        time.sleep(0.1)
    assert gone, "broker must garbage-collect sessions that stop responding"
    sock.close()


def test_client_pongs_keep_session_alive(server):
    a = BrokerClient.connect("alive", server.uri)
    time.sleep(3.0)  # several keepalive intervals
    assert any(n["name"] == "alive" for n in a.snapshot()["nodes"])
    a.close()


def test_unreachable_broker():
    with pytest.raises(BrokerUnreachable):
        BrokerClient.connect("x", "127.0.0.1:1", timeout=0.5)


def test_malformed_first_frame_gets_error(server):
    sock = socket.create_connection(("127.0.0.1", server.port))
    sock.sendall(wire.ping())  # not HELLO
    data = sock.recv(4096)
    assert data[4] == wire.ERROR
    sock.close()


def test_env_uri_override(server, monkeypatch):
    monkeypatch.setenv("NW_BROKER_URI", server.uri)
    c = BrokerClient.connect("envy")
    assert any(n["name"] == "envy" for n in c.snapshot()["nodes"])
    c.close()
