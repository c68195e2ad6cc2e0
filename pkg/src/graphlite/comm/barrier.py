"""Coordinator barrier on machine 0 with flush-then-release semantics."""
from __future__ import annotations

import threading

from ..errors import EngineAborted
from .transport import Kind


class Barrier:
    """Enter/ack/release barrier.

    Each machine reports how many flushable envelopes (data pushes, task
    forwards) it has sent to every peer. The coordinator tells each machine
    how many it must have applied before it may leave.
    """

    def __init__(self, me, m, send, abort: threading.Event | None = None):
        self.me = me
        self.m = m
        self._send = send
        self.abort = abort or threading.Event()
        self.flush_sent = [0] * m
        self.flush_applied = 0
        self._cond = threading.Condition()
        self._enters = {}
        self._releases = {}
        self.rounds = 0

    def note_sent(self, to):
        with self._cond:
            self.flush_sent[to] += 1

    def note_applied(self):
        with self._cond:
            self.flush_applied += 1
            self._cond.notify_all()

    # coordinator side, runs on machine 0's receive context
    def on_enter(self, sender, payload):
        key, sent, info = payload
        with self._cond:
            group = self._enters.setdefault(key, {})
            group[sender] = (sent, info)
            if len(group) < self.m:
                return
            del self._enters[key]
        infos = [group[i][1] for i in range(self.m)]
        for d in range(self.m):
            expected = sum(group[s][0][d] for s in range(self.m))
            self._send(d, Kind.BARRIER_RELEASE, (key, expected, infos))

    def on_release(self, payload):
        key, expected, infos = payload
        with self._cond:
            self._releases[key] = (expected, infos)
            self._cond.notify_all()

    def enter(self, key, info=None, timeout=None):
        """Block until every machine entered ``key`` and pending pushes landed.

        Returns the list of per-machine ``info`` objects, indexed by machine.
        """
        self.rounds += 1
        if self.m == 1:
            with self._cond:
                self._wait(lambda: self.flush_applied >= self.flush_sent[0], timeout)
            return [info]
        with self._cond:
            sent = list(self.flush_sent)
        self._send(0, Kind.BARRIER_ENTER, (key, sent, info))
        with self._cond:
            self._wait(lambda: key in self._releases
                       and self.flush_applied >= self._releases[key][0], timeout)
            _, infos = self._releases.pop(key)
        return infos

    def _wait(self, pred, timeout):
        waited = 0.0
        while not pred():
            if self.abort.is_set():
                raise EngineAborted("barrier aborted")
            if timeout is not None and waited >= timeout:
                raise TimeoutError("barrier timed out")
            self._cond.wait(0.05)
            waited += 0.05


def barrier(b: Barrier, round, info=None):
    return b.enter(round, info)
