import time

import pytest

from koordsim.transport import InProcessNetwork, NetConfig, UdpNetwork, make_transport


def test_reliable_broadcast_reaches_all_others():
    net = InProcessNetwork([0, 1, 2], NetConfig())
    assert net.broadcast(0, b"hello", now=0.0) == 2
    assert net.poll(1, 0.0) == [(b"hello", 0)]
    assert net.poll(2, 0.0) == [(b"hello", 0)]
    assert net.poll(0, 0.0) == []  # no self-delivery


def test_delivery_order_by_time_then_sender():
    net = InProcessNetwork([0, 1, 2], NetConfig())
    net.broadcast(2, b"late", now=1.0)
    net.broadcast(1, b"early", now=0.5)
    net.broadcast(0, b"tie", now=1.0)
    out = net.poll(1, 2.0)
    assert [p for p, _ in out] == [b"tie", b"late"]  # sender 0 ties before 2 at t=1
    out2 = net.poll(2, 2.0)
    assert [p for p, _ in out2] == [b"early", b"tie"]


def test_poll_respects_now():
    net = InProcessNetwork([0, 1], NetConfig(delay=0.5))
    net.broadcast(0, b"x", now=0.0)
    assert net.poll(1, 0.1) == []
    assert net.poll(1, 0.5) == [(b"x", 0)]


def test_seeded_loss_is_deterministic():
    def received(seed):
        net = InProcessNetwork([0, 1], NetConfig(loss_prob=0.5, seed=seed))
        got = []
        for i in range(100):
            net.broadcast(0, bytes([i]), now=float(i))
            got.extend(p for p, _ in net.poll(1, float(i)))
        return got

    a = received(seed=42)
    b = received(seed=42)
    c = received(seed=43)
    assert a == b
    assert a != c
    assert 20 < len(a) < 80  # roughly half dropped


def test_uniform_delay_range():
    net = InProcessNetwork([0, 1], NetConfig(delay=(0.1, 0.3), seed=1))
    for i in range(50):
        net.broadcast(0, b"x", now=0.0)
    assert net.poll(1, 0.0999) == []
    assert len(net.poll(1, 0.3)) == 50


def test_stats_counters():
    net = InProcessNetwork([0, 1, 2], NetConfig())
    net.current_round = 5
    net.broadcast(0, b"abcd", now=0.0)
    net.poll(1, 0.0)
    net.poll(2, 0.0)
    assert net.stats.packets_sent[0] == 2
    assert net.stats.total_received() == 2
    assert net.stats.bytes_received[1] == 4
    assert net.stats.per_round[1][5] == 1


def test_loss_counted_as_drop():
    net = InProcessNetwork([0, 1], NetConfig(loss_prob=1.0, seed=0))
    net.broadcast(0, b"x", now=0.0)
    assert net.stats.drops[0] == 1
    assert net.poll(1, 10.0) == []


def test_config_validation():
    with pytest.raises(ValueError):
        NetConfig(mode="carrier_pigeon").validate()
    with pytest.raises(ValueError):
        NetConfig(loss_prob=1.5).validate()
    with pytest.raises(ValueError):
        NetConfig(mode="udp", ports={0: 9000, 1: 9000}).validate()


def test_make_transport_dispatch():
    assert isinstance(make_transport([0, 1], NetConfig()), InProcessNetwork)


def test_udp_loopback_delivery():
    ports = {0: 56701, 1: 56702, 2: 56703}
    net = UdpNetwork([0, 1, 2], NetConfig(mode="udp", ports=ports))
    try:
        assert net.broadcast(0, b"ping", now=0.0) == 2
        deadline = time.time() + 2.0
        got = []
        while time.time() < deadline and len(got) < 1:
            got = net.poll(1, 0.0)
            time.sleep(0.01)
        assert got == [(b"ping", 0)]
    finally:
        net.close()


def test_udp_requires_port_per_pid():
    with pytest.raises(ValueError, match="no UDP port"):
        UdpNetwork([0, 1], NetConfig(mode="udp", ports={0: 56710}))
