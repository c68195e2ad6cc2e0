"""In-process drivers: run either engine over m logical machines with threads."""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from ..coloring import Coloring, color_for_model
from ..comm.ghosts import replica_mismatches
from ..comm.transport import InProcTransport
from ..errors import EngineAborted
from ..graph import DataGraph
from ..partition import Atom, LocalGraph, load_local, meta_graph, overpartition, place
from .chromatic import ChromaticMachine
from .locking import LockingMachine


@dataclass
class RunResult:
    vertex_data: list
    edge_data: list
    globals: dict
    records: list
    sync_records: list
    metrics: list
    counters: list
    num_machines: int
    wall_s: float
    sweeps: int = 0
    probe_mismatches: list = field(default_factory=list)
    owners: list = field(default_factory=list)

    @property
    def updates(self):
        return sum(c.updates for c in self.counters)

    @property
    def modifications(self):
        return sum(c.modifications for c in self.counters)

    @property
    def datum_pushes(self):
        return sum(c.datum_pushes for c in self.counters)

    def syncs_fired(self, key):
        return sum(1 for s in self.sync_records if s.key == key)


class CoherenceProbe:
    """Checks after every color barrier that all replicas byte-equal each other."""

    def __init__(self, locals_):
        self.locals = locals_
        self.gate = threading.Barrier(len(locals_))
        self.checks = 0
        self.mismatches = []

    def __call__(self, machine, sweep, color):
        self.gate.wait()
        if machine.me == 0:
            bad = replica_mismatches(self.locals)
            self.checks += 1
            if bad:
                self.mismatches.append((sweep, color, bad))
        self.gate.wait()


def prepare_locals(source, machines=1, k=None, method="bfs", coloring=None, model="edge",
                   codec=None):
    """Turn a graph, an atom list or ready local graphs into per-machine stores."""
    if isinstance(source, DataGraph):
        if coloring is None:
            coloring = color_for_model(source, model)
        elif not isinstance(coloring, Coloring):
            coloring = Coloring.from_list(coloring)
        k = k if k is not None else max(machines, min(source.num_vertices, 4 * machines))
        atoms, mg = overpartition(source, k, method=method, coloring=coloring)
        placement = place(mg, machines)
        return [load_local(atoms, placement, i, source.codec) for i in range(machines)]
    source = list(source)
    if source and isinstance(source[0], LocalGraph):
        return source
    if source and isinstance(source[0], Atom):
        placement = place(meta_graph(source), machines)
        return [load_local(source, placement, i, codec) for i in range(machines)]
    raise TypeError("source must be a DataGraph, a list of atoms or a list of local graphs")


def _collect(machines, locals_, t0, extra=None):
    n = locals_[0].num_vertices
    vertex = [None] * n
    edge = {}
    for mc in machines:
        vd, ed = mc.owned_state()
        for v, val in vd.items():
            vertex[v] = val
        edge.update(ed)
    edge_list = [edge[s] for s in range(len(edge))]
    records = sorted((r for mc in machines for r in mc.records),
                     key=lambda r: (r.commit_ns, r.machine, r.seq))
    return RunResult(
        vertex_data=vertex,
        edge_data=edge_list,
        globals=machines[0].globals.as_dict(),
        records=records,
        sync_records=list(machines[0].sync_records),
        metrics=sorted(row for mc in machines for row in mc.metrics_rows),
        counters=[mc.counters for mc in machines],
        num_machines=len(machines),
        wall_s=time.monotonic() - t0,
        owners=list(locals_[0].vertex_owner),
        **(extra or {}),
    )


def _drive(machines, transport):
    errors = [None] * len(machines)

    def body(i):
        try:
            machines[i].run()
        except BaseException as exc:
            errors[i] = exc
            machines[i].abort.set()

    threads = [threading.Thread(target=body, args=(i,), name=f"machine-{i}")
               for i in range(len(machines))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    transport.close()
    real = [mc.error for mc in machines if mc.error is not None]
    real += [e for e in errors if e is not None and not isinstance(e, EngineAborted)]
    if real:
        raise real[0]
    if any(errors):
        raise next(e for e in errors if e is not None)


def run_chromatic(source, program, model="edge", coloring=None, machines=1, k=None,
                  method="bfs", max_sweeps=1000, workers=1, seed=0, probe=False,
                  time_budget=None, record=True, metrics_interval=1.0, codec=None) -> RunResult:
    locals_ = prepare_locals(source, machines, k, method, coloring, model, codec)
    m = len(locals_)
    transport = InProcTransport(m, seed)
    abort = threading.Event()
    checker = CoherenceProbe(locals_) if probe and m > 1 else None
    ms = [ChromaticMachine(lg, transport.endpoint(lg.me), program, model, workers=workers,
                           max_sweeps=max_sweeps, time_budget=time_budget, probe=checker,
                           abort=abort, record=record, metrics_interval=metrics_interval)
          for lg in locals_]
    t0 = time.monotonic()
    _drive(ms, transport)
    extra = {"sweeps": ms[0].sweeps,
             "probe_mismatches": checker.mismatches if checker else []}
    res = _collect(ms, locals_, t0, extra)
    res.probe_checks = checker.checks if checker else 0
    return res


def run_locking(source, program, model="edge", scheduler="fifo", machines=1, k=None,
                method="bfs", maxpending=100, workers=1, seed=0, record=True,
                record_grants=False, metrics_interval=1.0, coloring=None, codec=None) -> RunResult:
    locals_ = prepare_locals(source, machines, k, method, coloring, "vertex", codec)
    m = len(locals_)
    transport = InProcTransport(m, seed)
    abort = threading.Event()
    ms = [LockingMachine(lg, transport.endpoint(lg.me), program, model, workers=workers,
                         scheduler=scheduler, maxpending=maxpending,
                         record_grants=record_grants, abort=abort, record=record,
                         metrics_interval=metrics_interval)
          for lg in locals_]
    t0 = time.monotonic()
    _drive(ms, transport)
    res = _collect(ms, locals_, t0)
    res.grant_logs = [mc.table.log for mc in ms]
    return res
