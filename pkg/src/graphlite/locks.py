"""Readers-writer scope locking with ordered acquisition and request pipelining."""
from __future__ import annotations

import enum
import itertools
import threading
import time
from collections import deque
from typing import NamedTuple

from .errors import DoubleRelease, NotOwned
from .graph import ConsistencyModel, as_model


class Mode(str, enum.Enum):
    SHARED = "shared"
    EXCLUSIVE = "exclusive"

    def __str__(self):
        return self.value


SHARED, EXCLUSIVE = Mode.SHARED, Mode.EXCLUSIVE


class LockEntry(NamedTuple):
    vertex: int
    mode: Mode


def plan_locks(g, v, model) -> list[LockEntry]:
    """Locks needed for the scope of ``v``, ascending by vertex id."""
    model = as_model(model)
    if hasattr(g, "owns") and not g.owns(v):
        raise NotOwned(f"vertex {v} is not owned here")
    if model is ConsistencyModel.NONE:
        return []
    if model is ConsistencyModel.VERTEX:
        return [LockEntry(v, EXCLUSIVE)]
    nbr_mode = EXCLUSIVE if model is ConsistencyModel.FULL else SHARED
    plan = [LockEntry(u, nbr_mode) for u in g.neighbors(v)]
    plan.append(LockEntry(v, EXCLUSIVE))
    plan.sort()
    return plan


class _VertexLock:
    __slots__ = ("holders", "queue")

    def __init__(self):
        self.holders = {}  # req id -> mode
        self.queue = deque()  # (req id, mode, callback)

    def compatible(self, mode):
        if not self.holders:
            return True
        if mode is EXCLUSIVE:
            return False
        return all(m is SHARED for m in self.holders.values())


class LockTable:
    """Per-vertex readers-writer locks with a strict arrival-order queue."""

    def __init__(self, record=False):
        self._locks = {}
        self._mutex = threading.Lock()
        self.record = record
        self.log = []  # (event, vertex, mode, req id, t_ns)

    def _get(self, v):
        lk = self._locks.get(v)
        if lk is None:
            lk = self._locks[v] = _VertexLock()
        return lk

    def request(self, vertex, mode, req_id, callback=None) -> bool:
        """Queue a request; True if granted immediately (callback not invoked)."""
        with self._mutex:
            lk = self._get(vertex)
            if not lk.queue and lk.compatible(mode):
                lk.holders[req_id] = mode
                if self.record:
                    self.log.append(("grant", vertex, mode, req_id, time.monotonic_ns()))
                return True
            lk.queue.append((req_id, mode, callback))
            return False

    def release(self, vertex, req_id):
        with self._mutex:
            lk = self._locks.get(vertex)
            if lk is None or req_id not in lk.holders:
                raise DoubleRelease(f"request {req_id} does not hold vertex {vertex}")
            mode = lk.holders.pop(req_id)
            if self.record:
                self.log.append(("release", vertex, mode, req_id, time.monotonic_ns()))
            granted = []
            while lk.queue and lk.compatible(lk.queue[0][1]):
                rid, m, cb = lk.queue.popleft()
                lk.holders[rid] = m
                if self.record:
                    self.log.append(("grant", vertex, m, rid, time.monotonic_ns()))
                granted.append(cb)
                if m is EXCLUSIVE:
                    break
        for cb in granted:
            if cb is not None:
                cb()

    def holders(self, vertex):
        with self._mutex:
            lk = self._locks.get(vertex)
            return dict(lk.holders) if lk else {}

    def queued(self, vertex):
        with self._mutex:
            lk = self._locks.get(vertex)
            return len(lk.queue) if lk else 0

    def idle(self):
        with self._mutex:
            return all(not lk.holders and not lk.queue for lk in self._locks.values())


def check_grant_log(log):
    """Replay a grant log; returns a list of mode conflicts (empty when safe)."""
    state = {}
    conflicts = []
    for event, vertex, mode, rid, t in log:
        holders = state.setdefault(vertex, {})
        if event == "grant":
            others = [m for r, m in holders.items() if r != rid]
            if others and (mode is EXCLUSIVE or EXCLUSIVE in others):
                conflicts.append((vertex, rid, t))
            holders[rid] = mode
        else:
            holders.pop(rid, None)
    return conflicts


_ticket_ids = itertools.count(1)


class Ticket:
    """Completion handle for one scope acquisition."""

    def __init__(self, plan, task=None, center=None):
        self.id = next(_ticket_ids)
        self.plan = list(plan)
        self.task = task
        self.center = center if center is not None else (task.vertex if task else None)
        self.next = 0
        self.done = threading.Event()
        self.released = False
        self.grant_ns = None
        self.requested_ns = time.monotonic_ns()

    def req_id(self, i):
        return (self.id, i)

    @property
    def completed(self):
        return self.done.is_set()

    def wait(self, timeout=None):
        return self.done.wait(timeout)

    def __repr__(self):
        state = "released" if self.released else ("held" if self.completed else f"acquiring {self.next}/{len(self.plan)}")
        return f"Ticket({self.id}, center={self.center}, {state})"


class LocalLockService:
    """Routes every lock of a plan to one in-process table."""

    def __init__(self, table: LockTable):
        self.table = table

    def acquire(self, ticket, i, on_granted):
        entry = ticket.plan[i]
        return self.table.request(entry.vertex, entry.mode, ticket.req_id(i), on_granted)

    def release(self, ticket, i):
        self.table.release(ticket.plan[i].vertex, ticket.req_id(i))


class LockPipeline:
    """Issues scope acquisitions without blocking the requester.

    At most ``maxpending`` tickets may be incomplete at once; 0 means one
    synchronous acquisition at a time.
    """

    def __init__(self, service, maxpending=100):
        self.service = service
        self.maxpending = maxpending
        self.cap = max(1, maxpending)
        self._cond = threading.Condition()
        self._inflight = 0
        self._ready = deque()

    @property
    def inflight(self):
        return self._inflight

    def has_capacity(self):
        return self._inflight < self.cap

    def request_scope(self, plan, task=None, center=None, block=True, timeout=None):
        with self._cond:
            if not self._cond.wait_for(self.has_capacity, timeout if block else 0):
                return None
            self._inflight += 1
        ticket = Ticket(plan, task, center)
        self._advance(ticket)
        return ticket

    def _advance(self, ticket):
        # Ordered acquisition: request lock i only after lock i-1 is held.
        while ticket.next < len(ticket.plan):
            i = ticket.next
            if not self.service.acquire(ticket, i, lambda t=ticket: self._granted(t)):
                return
            ticket.next += 1
        self._complete(ticket)

    def _granted(self, ticket):
        ticket.next += 1
        self._advance(ticket)

    def _complete(self, ticket):
        ticket.grant_ns = time.monotonic_ns()
        with self._cond:
            self._inflight -= 1
            self._ready.append(ticket)
            ticket.done.set()
            self._cond.notify_all()

    def wait_ready(self, timeout=None):
        """Pop every completed ticket, waiting up to ``timeout`` for one."""
        with self._cond:
            if not self._ready and timeout:
                self._cond.wait_for(lambda: self._ready, timeout)
            out = list(self._ready)
            self._ready.clear()
            return out

    def poke(self):
        with self._cond:
            self._cond.notify_all()

    def release_scope(self, ticket):
        if ticket.released:
            raise DoubleRelease(f"ticket {ticket.id} already released")
        if not ticket.completed:
            raise DoubleRelease(f"ticket {ticket.id} not yet granted")
        ticket.released = True
        for i in range(len(ticket.plan)):
            self.service.release(ticket, i)


def request_scope(pl: LockPipeline, plan, task=None):
    return pl.request_scope(plan, task)


def release_scope(pl: LockPipeline, ticket):
    pl.release_scope(ticket)
