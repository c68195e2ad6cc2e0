"""Envelope transport between logical machines: in-process channels and TCP sockets."""
from __future__ import annotations

import enum
import logging
import random
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass
from queue import Empty, Queue

from ..errors import PeerUnreachable

log = logging.getLogger(__name__)


class Kind(enum.IntEnum):
    LOCK_REQUEST = 1
    LOCK_GRANT = 2
    LOCK_RELEASE = 3
    DATA_PUSH = 4
    BARRIER_ENTER = 5
    BARRIER_RELEASE = 6
    SYNC_PARTIAL = 7
    SYNC_RESULT = 8
    TERM_TOKEN = 9
    TASK_FORWARD = 10


# Messages that can create work; counted by termination detection.
BASIC_KINDS = frozenset({Kind.LOCK_REQUEST, Kind.LOCK_GRANT, Kind.LOCK_RELEASE,
                         Kind.DATA_PUSH, Kind.TASK_FORWARD})
# Messages a barrier must see applied before it releases.
FLUSH_KINDS = frozenset({Kind.DATA_PUSH, Kind.TASK_FORWARD})


@dataclass(frozen=True)
class Envelope:
    kind: Kind
    sender: int
    payload: bytes


_FRAME = struct.Struct("<IBI")


def encode_frame(env: Envelope) -> bytes:
    """4-byte LE length of everything after it, 1-byte kind, 4-byte sender, payload."""
    return _FRAME.pack(1 + 4 + len(env.payload), int(env.kind), env.sender) + env.payload


def decode_frames(buf: bytearray):
    """Consume complete frames from ``buf``; returns the envelopes parsed."""
    out = []
    while len(buf) >= 4:
        (length,) = struct.unpack_from("<I", buf, 0)
        if len(buf) < 4 + length:
            break
        _, kind, sender = _FRAME.unpack_from(buf, 0)
        payload = bytes(buf[_FRAME.size:4 + length])
        del buf[:4 + length]
        out.append(Envelope(Kind(kind), sender, payload))
    return out


class Endpoint:
    """One machine's view of the transport."""

    def __init__(self, me, m):
        self.me = me
        self.m = m
        self.handler = None
        self.on_error = None
        self.sent = 0
        self.bytes_sent = 0
        self._stat_lock = threading.Lock()

    def set_handler(self, handler):
        self.handler = handler

    def _check(self, to):
        if not 0 <= to < self.m:
            raise PeerUnreachable(f"machine {to} not in cluster of {self.m}")

    def _count(self, env):
        with self._stat_lock:
            self.sent += 1
            self.bytes_sent += len(env.payload)

    def _dispatch(self, env):
        try:
            self.handler(env)
        except Exception as exc:  # a failing handler tears the run down
            log.exception("handler failed on machine %d", self.me)
            if self.on_error:
                self.on_error(exc)

    def send(self, to, kind, payload: bytes):
        raise NotImplementedError

    def close(self):
        pass


class InProcEndpoint(Endpoint):
    def __init__(self, transport, me):
        super().__init__(me, transport.m)
        self.transport = transport
        self._channels = {}  # sender -> deque
        self._cond = threading.Condition()
        self._rng = random.Random(transport.seed * 1_000_003 + me)
        self._closed = False
        self._thread = threading.Thread(target=self._deliver, name=f"inproc-rx-{me}", daemon=True)
        self._idle = threading.Event()
        self._idle.set()
        self._thread.start()

    def send(self, to, kind, payload):
        self._check(to)
        env = Envelope(Kind(kind), self.me, payload)
        self._count(env)
        self.transport.endpoints[to]._enqueue(env)

    def _enqueue(self, env):
        with self._cond:
            if self._closed:
                return
            self._channels.setdefault(env.sender, deque()).append(env)
            self._idle.clear()
            self._cond.notify()

    def _deliver(self):
        while True:
            with self._cond:
                while not self._closed and not any(self._channels.values()):
                    self._idle.set()
                    self._cond.wait()
                if self._closed:
                    return
                # seeded choice among senders; FIFO within each sender
                senders = sorted(s for s, q in self._channels.items() if q)
                sender = senders[self._rng.randrange(len(senders))]
                env = self._channels[sender].popleft()
            if self.handler is not None:
                self._dispatch(env)

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()


class InProcTransport:
    """Deterministic-seed in-process channels; one delivery thread per machine."""

    def __init__(self, m, seed=0):
        self.m = m
        self.seed = seed
        self.endpoints = []
        self.endpoints = [InProcEndpoint(self, i) for i in range(m)]

    def endpoint(self, i):
        return self.endpoints[i]

    def close(self):
        for ep in self.endpoints:
            ep.close()


class SocketEndpoint(Endpoint):
    """Length-prefixed frames over one TCP connection per ordered machine pair."""

    def __init__(self, me, hosts, connect_timeout=30.0):
        super().__init__(me, len(hosts))
        self.hosts = [(h, int(p)) for h, p in hosts]
        self.connect_timeout = connect_timeout
        self._inbox = Queue()
        self._out = {}
        self._out_locks = [threading.Lock() for _ in range(self.m)]
        self._closed = False
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind(self.hosts[me])
        self._server.listen(self.m + 4)
        self._readers = []
        threading.Thread(target=self._accept, name=f"sock-accept-{me}", daemon=True).start()
        threading.Thread(target=self._deliver, name=f"sock-rx-{me}", daemon=True).start()

    def _accept(self):
        while not self._closed:
            try:
                conn, _ = self._server.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            t = threading.Thread(target=self._read, args=(conn,), daemon=True)
            self._readers.append(conn)
            t.start()

    def _read(self, conn):
        buf = bytearray()
        while not self._closed:
            try:
                chunk = conn.recv(1 << 16)
            except OSError:
                return
            if not chunk:
                return
            buf.extend(chunk)
            for env in decode_frames(buf):
                self._inbox.put(env)

    def _deliver(self):
        while not self._closed:
            try:
                env = self._inbox.get(timeout=0.1)
            except Empty:
                continue
            if self.handler is not None:
                self._dispatch(env)

    def _connection(self, to):
        sock = self._out.get(to)
        if sock is not None:
            return sock
        deadline = time.monotonic() + self.connect_timeout
        while True:
            try:
                sock = socket.create_connection(self.hosts[to], timeout=5.0)
                sock.settimeout(None)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self._out[to] = sock
                return sock
            except OSError as exc:
                if time.monotonic() > deadline:
                    raise PeerUnreachable(f"machine {to} at {self.hosts[to]}: {exc}") from exc
                time.sleep(0.05)

    def send(self, to, kind, payload):
        self._check(to)
        env = Envelope(Kind(kind), self.me, payload)
        self._count(env)
        if to == self.me:
            self._inbox.put(env)
            return
        frame = encode_frame(env)
        with self._out_locks[to]:
            try:
                self._connection(to).sendall(frame)
            except OSError as exc:
                raise PeerUnreachable(f"machine {to}: {exc}") from exc

    def close(self):
        self._closed = True
        for sock in list(self._out.values()) + self._readers:
            try:
                sock.close()
            except OSError:
                pass
        try:
            self._server.close()
        except OSError:
            pass


def free_ports(count, host="127.0.0.1"):
    socks, ports = [], []
    for _ in range(count):
        s = socket.socket()
        s.bind((host, 0))
        socks.append(s)
        ports.append(s.getsockname()[1])
    for s in socks:
        s.close()
    return ports


def read_hosts(path):
    hosts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                host, port = line.rsplit(":", 1)
                hosts.append((host, int(port)))
    return hosts


def write_hosts(path, hosts):
    with open(path, "w") as fh:
        for host, port in hosts:
            fh.write(f"{host}:{port}\n")
