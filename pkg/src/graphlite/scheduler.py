"""Task containers realizing the RemoveNext step: sweep, FIFO and priority."""
from __future__ import annotations

import heapq
import threading
from collections import OrderedDict
from typing import NamedTuple


class UpdateTask(NamedTuple):
    fn_id: int
    vertex: int


class Scheduler:
    """Deduplicating task set. Thread safe; every operation is atomic."""

    kind = None

    def __init__(self):
        self._lock = threading.Lock()

    def add_task(self, task, priority=0.0):
        raise NotImplementedError

    def remove_next(self):
        """Return the next task or None when empty."""
        raise NotImplementedError

    def pending_count(self) -> int:
        raise NotImplementedError

    def __len__(self):
        return self.pending_count()

    def __contains__(self, task):
        with self._lock:
            return tuple(task) in self._members()

    def add_all(self, tasks):
        for t in tasks:
            if len(t) == 3:
                self.add_task(UpdateTask(t[0], t[1]), t[2])
            else:
                self.add_task(UpdateTask(*t))


class FifoScheduler(Scheduler):
    kind = "fifo"

    def __init__(self):
        super().__init__()
        self._queue = OrderedDict()

    def _members(self):
        return self._queue

    def add_task(self, task, priority=0.0):
        task = UpdateTask(*task)
        with self._lock:
            if task not in self._queue:
                self._queue[task] = None

    def remove_next(self):
        with self._lock:
            if not self._queue:
                return None
            return self._queue.popitem(last=False)[0]

    def pending_count(self):
        with self._lock:
            return len(self._queue)


class PriorityScheduler(Scheduler):
    """Exact max-priority queue; ties go to the lower vertex id, then fn id."""

    kind = "priority"

    def __init__(self):
        super().__init__()
        self._heap = []
        self._prio = {}

    def _members(self):
        return self._prio

    def add_task(self, task, priority=0.0):
        task = UpdateTask(*task)
        priority = float(priority)
        with self._lock:
            old = self._prio.get(task)
            if old is not None and old >= priority:
                return
            self._prio[task] = priority
            heapq.heappush(self._heap, (-priority, task.vertex, task.fn_id))

    def remove_next(self):
        with self._lock:
            while self._heap:
                negp, v, f = heapq.heappop(self._heap)
                task = UpdateTask(f, v)
                if self._prio.get(task) == -negp:
                    del self._prio[task]
                    return task
            return None

    def priority(self, task):
        with self._lock:
            return self._prio.get(UpdateTask(*task))

    def peek_priority(self):
        with self._lock:
            while self._heap:
                negp, v, f = self._heap[0]
                if self._prio.get(UpdateTask(f, v)) == -negp:
                    return -negp
                heapq.heappop(self._heap)
            return None

    def pending_count(self):
        with self._lock:
            return len(self._prio)


class SweepScheduler(Scheduler):
    """Canonical (color, vertex) order with a sweep cursor.

    A task added at or behind the cursor waits for the next sweep.
    """

    kind = "sweep"

    def __init__(self, colors=None):
        super().__init__()
        self._colors = colors
        self._current = []
        self._next = []
        self._members_set = set()
        self._cursor = None

    def _members(self):
        return self._members_set

    def color_of(self, v):
        return 0 if self._colors is None else int(self._colors[v])

    def add_task(self, task, priority=0.0):
        task = UpdateTask(*task)
        with self._lock:
            if task in self._members_set:
                return
            self._members_set.add(task)
            key = (self.color_of(task.vertex), task.vertex, task.fn_id)
            if self._cursor is not None and key <= self._cursor:
                heapq.heappush(self._next, key)
            else:
                heapq.heappush(self._current, key)

    def _roll(self):
        if not self._current and self._next:
            self._current, self._next = self._next, []
            self._cursor = None

    def remove_next(self):
        with self._lock:
            self._roll()
            if not self._current:
                return None
            key = heapq.heappop(self._current)
            self._cursor = key
            task = UpdateTask(key[2], key[1])
            self._members_set.discard(task)
            return task

    def pop_color(self, color):
        """Remove every current-sweep task of ``color`` (ascending vertex).

        Afterwards the cursor sits past ``color``, so same-color tasks added
        later are deferred to the next sweep.
        """
        with self._lock:
            out = []
            while self._current and self._current[0][0] < color:
                # stragglers from earlier colors in this sweep run next sweep
                heapq.heappush(self._next, heapq.heappop(self._current))
            while self._current and self._current[0][0] == color:
                key = heapq.heappop(self._current)
                task = UpdateTask(key[2], key[1])
                self._members_set.discard(task)
                out.append(task)
            self._cursor = (color, float("inf"), 0)
            return out

    def end_sweep(self):
        """Close the current sweep; whatever is pending belongs to the next one."""
        with self._lock:
            for key in self._current:
                heapq.heappush(self._next, key)
            self._current, self._next = self._next, []
            self._cursor = None

    def pending_count(self):
        with self._lock:
            return len(self._members_set)


def make_scheduler(kind: str, colors=None) -> Scheduler:
    if kind == "fifo":
        return FifoScheduler()
    if kind == "priority":
        return PriorityScheduler()
    if kind == "sweep":
        return SweepScheduler(colors)
    raise ValueError(f"unknown scheduler kind {kind!r}")


def add_task(s: Scheduler, t, priority=0.0):
    s.add_task(t, priority)


def remove_next(s: Scheduler):
    return s.remove_next()


def pending_count(s: Scheduler) -> int:
    return s.pending_count()
