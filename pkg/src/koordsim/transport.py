"""Pluggable broadcast transports.

Two interchangeable modes:

* in_process — deterministic simulated network driven by the harness clock,
  with seedable per-receiver packet loss and delivery delay.
* udp — loopback unicast to each peer's port (one UDP port per robot), with a
  background receive thread per endpoint.
"""

from __future__ import annotations

import heapq
import socket
import threading
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np


@dataclass
class NetConfig:
    mode: str = "in_process"  # "in_process" | "udp"
    loss_prob: float = 0.0
    delay: Union[float, tuple[float, float]] = 0.0  # fixed, or uniform (lo, hi)
    seed: int = 0
    ports: dict[int, int] = field(default_factory=dict)  # pid -> UDP port

    def validate(self) -> None:
        if self.mode not in ("in_process", "udp"):
            raise ValueError(f"unknown net mode {self.mode!r}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")
        if self.mode == "udp" and len(set(self.ports.values())) != len(self.ports):
            raise ValueError("UDP ports must be distinct")


@dataclass
class PacketStats:
    packets_sent: dict[int, int] = field(default_factory=dict)
    packets_received: dict[int, int] = field(default_factory=dict)
    bytes_received: dict[int, int] = field(default_factory=dict)
    drops: dict[int, int] = field(default_factory=dict)
    send_errors: int = 0
    # per-pid histogram: round -> packets received
    per_round: dict[int, dict[int, int]] = field(default_factory=dict)

    def on_send(self, pid: int, count: int = 1) -> None:
        self.packets_sent[pid] = self.packets_sent.get(pid, 0) + count

    def on_drop(self, pid: int) -> None:
        self.drops[pid] = self.drops.get(pid, 0) + 1

    def on_receive(self, pid: int, nbytes: int, round_idx: int) -> None:
        self.packets_received[pid] = self.packets_received.get(pid, 0) + 1
        self.bytes_received[pid] = self.bytes_received.get(pid, 0) + nbytes
        hist = self.per_round.setdefault(pid, {})
        hist[round_idx] = hist.get(round_idx, 0) + 1

    def total_received(self) -> int:
        return sum(self.packets_received.values())

    def total_bytes_received(self) -> int:
        return sum(self.bytes_received.values())


class InProcessNetwork:
    """Deterministic simulated broadcast network.

    With loss_prob=0 and delay=0 the network is perfectly reliable: every
    broadcast is delivered to all other pids at the send time, in
    (delivery time, sender pid) order.
    """

    def __init__(self, pids: list[int], config: NetConfig):
        config.validate()
        self.pids = sorted(pids)
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.stats = PacketStats()
        self.current_round = 0
        self._seq = 0
        # per-receiver heap of (deliver_time, sender, seq, payload)
        self._queues: dict[int, list] = {pid: [] for pid in self.pids}

    def _delay(self) -> float:
        d = self.config.delay
        if isinstance(d, tuple):
            lo, hi = d
            return float(self.rng.uniform(lo, hi))
        return float(d)

    def broadcast(self, sender: int, payload: bytes, now: float = 0.0) -> int:
        sent = 0
        for pid in self.pids:
            if pid == sender:
                continue
            if self.config.loss_prob > 0 and self.rng.random() < self.config.loss_prob:
                self.stats.on_drop(sender)
                continue
            heapq.heappush(
                self._queues[pid], (now + self._delay(), sender, self._seq, payload)
            )
            self._seq += 1
            sent += 1
        self.stats.on_send(sender, sent)
        return sent

    def poll(self, receiver: int, now: float) -> list[tuple[bytes, int]]:
        queue = self._queues[receiver]
        due = []
        while queue and queue[0][0] <= now + 1e-12:
            due.append(heapq.heappop(queue))
        due.sort(key=lambda rec: (rec[0], rec[1], rec[2]))
        out = []
        for _t, sender, _seq, payload in due:
            self.stats.on_receive(receiver, len(payload), self.current_round)
            out.append((payload, sender))
        return out

    def close(self) -> None:
        pass


class UdpNetwork:
    """Loopback-unicast emulation of broadcast, one UDP port per robot."""

    def __init__(self, pids: list[int], config: NetConfig):
        config.validate()
        missing = [pid for pid in pids if pid not in config.ports]
        if missing:
            raise ValueError(f"no UDP port configured for pids {missing}")
        self.pids = sorted(pids)
        self.config = config
        self.stats = PacketStats()
        self.current_round = 0
        self._socks: dict[int, socket.socket] = {}
        self._queues: dict[int, list] = {pid: [] for pid in self.pids}
        self._locks: dict[int, threading.Lock] = {pid: threading.Lock() for pid in self.pids}
        self._threads: list[threading.Thread] = []
        self._closing = threading.Event()
        for pid in self.pids:
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sock.bind(("127.0.0.1", config.ports[pid]))
            sock.settimeout(0.05)
            self._socks[pid] = sock
            t = threading.Thread(target=self._recv_loop, args=(pid, sock), daemon=True)
            t.start()
            self._threads.append(t)
        # sender pid is recovered from the wire header, not the socket address
        self._port_to_pid = {port: pid for pid, port in config.ports.items()}

    def _recv_loop(self, pid: int, sock: socket.socket) -> None:
        while not self._closing.is_set():
            try:
                data, addr = sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                return
            sender = self._port_to_pid.get(addr[1], -1)
            with self._locks[pid]:
                self._queues[pid].append((data, sender))
            self.stats.on_receive(pid, len(data), self.current_round)

    def broadcast(self, sender: int, payload: bytes, now: float = 0.0) -> int:
        sock = self._socks[sender]
        sent = 0
        for pid in self.pids:
            if pid == sender:
                continue
            try:
                sock.sendto(payload, ("127.0.0.1", self.config.ports[pid]))
                sent += 1
            except OSError:
                self.stats.send_errors += 1
        self.stats.on_send(sender, sent)
        return sent

    def poll(self, receiver: int, now: float) -> list[tuple[bytes, int]]:
        with self._locks[receiver]:
            out = self._queues[receiver]
            self._queues[receiver] = []
        return out

    def close(self) -> None:
        self._closing.set()
        for t in self._threads:
            t.join(timeout=0.5)
        for sock in self._socks.values():
            sock.close()


def make_transport(pids: list[int], config: NetConfig):
    if config.mode == "udp":
        return UdpNetwork(pids, config)
    return InProcessNetwork(pids, config)
