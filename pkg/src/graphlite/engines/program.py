"""Update programs: update functions, initial tasks, sync definitions, global table."""
from __future__ import annotations

import copy
import threading
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable

from ..scheduler import UpdateTask


@dataclass
class SyncDefinition:
    """Periodic global fold/merge/finalize aggregation.

    ``fold(acc, v, data) -> acc`` runs over each machine's owned vertices,
    ``merge(acc, acc) -> acc`` combines machine partials, ``finalize(acc)``
    produces the published value. ``tau`` is the update-count interval.
    """

    key: str
    fold: Callable
    merge: Callable
    finalize: Callable = lambda acc: acc
    acc0: Any = None
    tau: int = 1

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("sync interval tau must be >= 1")

    def initial(self):
        return copy.deepcopy(self.acc0)


class GlobalTable:
    """Latest finalized sync values; readers get immutable snapshots."""

    def __init__(self):
        self._values = {}
        self._lock = threading.Lock()
        self._snap = MappingProxyType({})

    def publish(self, values: dict):
        with self._lock:
            self._values.update(values)
            self._snap = MappingProxyType(dict(self._values))

    def snapshot(self):
        return self._snap

    def __getitem__(self, key):
        return self._snap[key]

    def get(self, key, default=None):
        return self._snap.get(key, default)

    def as_dict(self):
        return dict(self._snap)


@dataclass
class Program:
    fns: dict
    initial_tasks: list = field(default_factory=list)
    syncs: list = field(default_factory=list)
    name: str = "program"

    def sync(self, key):
        for sd in self.syncs:
            if sd.key == key:
                return sd
        raise KeyError(key)


def normalize_tasks(out):
    """Coerce update-function output into (fn_id, vertex, priority) triples."""
    if not out:
        return []
    tasks = []
    for t in out:
        if isinstance(t, UpdateTask):
            tasks.append((t.fn_id, t.vertex, 0.0))
        elif len(t) == 2:
            first, second = t
            if isinstance(first, UpdateTask):
                tasks.append((first.fn_id, first.vertex, float(second)))
            else:
                tasks.append((int(first), int(second), 0.0))
        else:
            tasks.append((int(t[0]), int(t[1]), float(t[2])))
    return tasks
