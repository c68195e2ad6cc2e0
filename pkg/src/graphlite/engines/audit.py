"""Serializability audit: grant-interval conflict check plus sequential replay."""
from __future__ import annotations

import pickle
from dataclasses import dataclass, field
from types import MappingProxyType

from ..errors import ReplayMismatch
from ..graph import ConsistencyModel, as_model, commit_scope, edatum, open_scope, vdatum
from .sync import fold_partial, merge_partials


@dataclass
class AuditVerdict:
    ok: bool
    conflicts: list = field(default_factory=list)
    mismatch: ReplayMismatch | None = None
    replayed: int = 0
    syncs_checked: int = 0

    @property
    def first_violation(self):
        if self.conflicts:
            a, b, datum = self.conflicts[0]
            return f"tasks {a} and {b} overlapped with conflicting access to {datum}"
        if self.mismatch is not None:
            return str(self.mismatch)
        return None

    def raise_for_failure(self):
        if self.mismatch is not None:
            raise self.mismatch
        if self.conflicts:
            raise ReplayMismatch(self.conflicts[0][2], None, None)


def capabilities(g, v, model):
    """(read set, write set) of datums for the scope of ``v`` under ``model``."""
    model = as_model(model)
    reads, writes = {vdatum(v)}, {vdatum(v)}
    for u in g.neighbors(v):
        e = g.edge_id(u, v)
        vd, eds = vdatum(u), (edatum(2 * e), edatum(2 * e + 1))
        reads.add(vd)
        reads.update(eds)
        if model in (ConsistencyModel.FULL, ConsistencyModel.NONE):
            writes.add(vd)
        if model is not ConsistencyModel.VERTEX:
            writes.update(eds)
    return reads, writes


def grant_conflicts(records, g, model):
    """Pairs of time-overlapping tasks whose capabilities conflict on some datum."""
    caps = {}

    def cap(v):
        if v not in caps:
            caps[v] = capabilities(g, v, model)
        return caps[v]

    out = []
    active = []
    for i, r in sorted(enumerate(records), key=lambda x: (x[1].grant_ns, x[0])):
        active = [(j, a) for j, a in active if a.release_ns > r.grant_ns]
        rr, rw = cap(r.vertex)
        for j, a in active:
            ar, aw = cap(a.vertex)
            clash = (rw & ar) | (aw & rr)
            if clash:
                out.append(((a.machine, a.seq), (r.machine, r.seq), min(clash)))
        active.append((i, r))
    return out


def _fold_sync(sd, g, owners, m):
    groups = [[] for _ in range(m)]
    for v in range(g.num_vertices):
        groups[owners[v] if owners else 0].append(v)
    partials = [fold_partial(sd, g, vs) for vs in groups]
    return sd.finalize(merge_partials(sd, partials))


def _same(a, b):
    try:
        return pickle.dumps(a, protocol=4) == pickle.dumps(b, protocol=4) or a == b
    except Exception:
        return False


def replay(records, sync_records, program, g0, model, owners=None):
    """Re-execute committed tasks one at a time in commit order from ``g0``.

    Sync values are recomputed at their recorded instants and compared with
    what the run published. Returns (replayed graph, syncs checked) or
    raises ReplayMismatch.
    """
    model = as_model(model)
    replay_model = ConsistencyModel.FULL if model is ConsistencyModel.NONE else model
    g = g0.copy()
    m = (max(owners) + 1) if owners else 1
    events = [(r.commit_ns, 1, i, r) for i, r in enumerate(records)]
    events += [(s.t_ns, 0, i, s) for i, s in enumerate(sync_records)]
    events.sort(key=lambda e: e[:3])
    table = {}
    checked = 0
    for _, kind, _, ev in events:
        if kind == 0:
            value = _fold_sync(program.sync(ev.key), g, owners, m)
            if not _same(value, ev.value):
                raise ReplayMismatch(("sync", ev.key), ev.value, value)
            table[ev.key] = ev.value
            checked += 1
            continue
        scope = open_scope(g, ev.vertex, replay_model)
        program.fns[ev.fn_id](ev.vertex, scope, MappingProxyType(dict(table)))
        commit_scope(g, scope)
    return g, checked


def compare_final(g, vertex_data, edge_data):
    """First datum whose replayed bytes differ from the run's final data."""
    enc = g.codec.encode
    for v in range(g.num_vertices):
        if enc(g.vertex_data[v]) != enc(vertex_data[v]):
            return ReplayMismatch(vdatum(v), enc(vertex_data[v]), enc(g.vertex_data[v]))
    for s in range(len(g.edge_data)):
        if enc(g.edge_data[s]) != enc(edge_data[s]):
            return ReplayMismatch(edatum(s), enc(edge_data[s]), enc(g.edge_data[s]))
    return None


def audit_serializability(records, sync_records, program, g0, vertex_data, edge_data,
                          model="edge", owners=None) -> AuditVerdict:
    conflicts = grant_conflicts(records, g0, model)
    try:
        g, checked = replay(records, sync_records, program, g0, model, owners)
    except ReplayMismatch as exc:
        return AuditVerdict(False, conflicts, exc, len(records))
    mismatch = compare_final(g, vertex_data, edge_data)
    ok = not conflicts and mismatch is None
    return AuditVerdict(ok, conflicts, mismatch, len(records), checked)


def audit_result(result, program, g0, model="edge") -> AuditVerdict:
    """Audit a RunResult produced by one of the in-process drivers."""
    return audit_serializability(result.records, result.sync_records, program, g0,
                                 result.vertex_data, result.edge_data, model, result.owners)
