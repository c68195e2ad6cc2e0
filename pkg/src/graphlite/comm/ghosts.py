"""Version-filtered propagation of modified data to ghost replicas."""
from __future__ import annotations

from ..graph import vdatum, edatum
from .transport import Kind


class DataPush(tuple):
    """(datum, version, payload bytes)."""

    __slots__ = ()

    def __new__(cls, datum, version, data):
        return super().__new__(cls, (datum, version, data))

    def __getnewargs__(self):
        return tuple(self)

    datum = property(lambda self: self[0])
    version = property(lambda self: self[1])
    data = property(lambda self: self[2])


def snapshot(lg, datum):
    with lg.lock:
        return DataPush(datum, lg.version(datum), lg.encoded(datum))


def push_modified(lg, send, datums=None) -> int:
    """Send every datum whose version exceeds the last pushed one.

    ``send(machine, kind, push)`` delivers one DataPush. Returns the number
    of datum versions published (each may go to several replica holders).
    """
    if datums is None:
        datums = list(lg.datums())
    published = 0
    for datum in datums:
        holders = lg.replicas(datum)
        if not holders:
            continue
        push = snapshot(lg, datum)
        if push.version <= lg.last_pushed.get(datum, 0):
            continue
        lg.last_pushed[datum] = push.version
        for m in holders:
            send(m, Kind.DATA_PUSH, push)
        published += 1
    return published


def apply_push(lg, push) -> bool:
    """Install ``push`` iff it is newer than the local replica."""
    datum, version, data = push
    with lg.lock:
        if version <= lg.version(datum):
            return False
        lg.put(datum, lg.codec.decode(data), version)
        if lg.last_pushed.get(datum, 0) < version:
            lg.last_pushed[datum] = version
        return True


def replica_mismatches(locals_):
    """Datums whose replicas differ from each other; instrumentation helper."""
    copies = {}
    for lg in locals_:
        for datum in lg.datums():
            copies.setdefault(datum, []).append((lg.me, lg.encoded(datum)))
    bad = []
    for datum, reps in copies.items():
        if len({b for _, b in reps}) > 1:
            bad.append(datum)
    return bad


__all__ = ["DataPush", "push_modified", "apply_push", "replica_mismatches", "vdatum", "edatum"]
