"""Per-machine runtime shared by both engines: messaging, task execution, syncs."""
from __future__ import annotations

import logging
import pickle
import threading
import time
from dataclasses import dataclass

from ..comm.barrier import Barrier
from ..comm.ghosts import apply_push, push_modified
from ..comm.termination import TerminationDetector
from ..comm.transport import BASIC_KINDS, FLUSH_KINDS, Kind
from ..errors import EngineAborted
from ..graph import as_model, commit_scope, open_scope
from .log import CommitRecord, SyncRecord
from .program import GlobalTable, normalize_tasks
from .sync import fold_partial, merge_partials

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("machine", "wall_ms", "updates", "envelopes", "bytes_pushed", "syncs_run")


@dataclass
class Counters:
    updates: int = 0
    modifications: int = 0
    datum_pushes: int = 0
    bytes_pushed: int = 0
    syncs_run: int = 0
    basic_sent: int = 0
    basic_recv: int = 0


class Machine:
    """State and protocol handling for one logical machine."""

    def __init__(self, store, endpoint, program, model, workers=1, abort=None,
                 record=True, metrics_interval=1.0):
        self.store = store
        self.me = store.me
        self.m = store.num_machines
        self.ep = endpoint
        self.program = program
        self.model = as_model(model)
        self.workers = max(1, int(workers))
        self.abort = abort or threading.Event()
        self.record = record
        self.counters = Counters()
        self.globals = GlobalTable()
        self.detector = TerminationDetector(self.me, self.m)
        self.barrier = Barrier(self.me, self.m, self.send, self.abort)
        self.records = []
        self.sync_records = []
        self.error = None
        self.metrics_rows = []
        self.metrics_interval = metrics_interval
        self._t0 = time.monotonic()
        self._seq = 0
        self._seq_lock = threading.Lock()
        self._count_lock = threading.Lock()
        self._sync_cond = threading.Condition()
        self._sync_results = {}
        self._sync_partials = {}
        self._sync_published = {}
        self._handlers = {
            Kind.DATA_PUSH: self._on_data_push,
            Kind.TASK_FORWARD: self._on_task_forward,
            Kind.BARRIER_ENTER: self.barrier.on_enter,
            Kind.BARRIER_RELEASE: lambda s, o: self.barrier.on_release(o),
            Kind.SYNC_PARTIAL: self._on_sync_partial,
            Kind.SYNC_RESULT: self._on_sync_result,
            Kind.TERM_TOKEN: self._on_token,
            Kind.LOCK_REQUEST: self._on_lock_request,
            Kind.LOCK_GRANT: self._on_lock_grant,
            Kind.LOCK_RELEASE: self._on_lock_release,
        }
        endpoint.set_handler(self._on_envelope)
        endpoint.on_error = self.fail

    # -- failure ---------------------------------------------------------
    def fail(self, exc):
        if self.error is None:
            self.error = exc
        self.abort.set()

    def check_abort(self):
        if self.abort.is_set():
            raise EngineAborted(f"machine {self.me}: run aborted")

    # -- messaging -------------------------------------------------------
    def send(self, to, kind, obj):
        data = pickle.dumps(obj, protocol=4)
        if kind in BASIC_KINDS:
            with self._count_lock:
                self.counters.basic_sent += 1
        if kind in FLUSH_KINDS:
            self.barrier.note_sent(to)
        if kind == Kind.DATA_PUSH:
            with self._count_lock:
                self.counters.bytes_pushed += len(obj[2])
        self.ep.send(to, kind, data)

    def _on_envelope(self, env):
        obj = pickle.loads(env.payload)
        self._handlers[env.kind](env.sender, obj)
        if env.kind in FLUSH_KINDS:
            self.barrier.note_applied()
        if env.kind in BASIC_KINDS:
            with self._count_lock:
                self.counters.basic_recv += 1
                self.detector.mark_dirty()

    def _on_data_push(self, sender, push):
        apply_push(self.store, push)

    def _on_task_forward(self, sender, tasks):
        self.add_local(tasks)

    def _on_token(self, sender, token):
        raise NotImplementedError

    def _on_lock_request(self, sender, obj):
        raise NotImplementedError

    _on_lock_grant = _on_lock_release = _on_lock_request

    # -- tasks -----------------------------------------------------------
    def add_local(self, tasks):
        raise NotImplementedError

    def route(self, tasks):
        """Queue owned tasks locally and forward the rest to their owners."""
        local, remote = [], {}
        owner = self.store.vertex_owner
        for t in tasks:
            dest = owner[t[1]]
            if dest == self.me:
                local.append(t)
            else:
                remote.setdefault(dest, []).append(t)
        if local:
            self.add_local(local)
        for dest in sorted(remote):
            self.send(dest, Kind.TASK_FORWARD, remote[dest])

    def run_task(self, task):
        fn_id, v = task[0], task[1]
        scope = open_scope(self.store, v, self.model)
        out = self.program.fns[fn_id](v, scope, self.globals.snapshot())
        modified = commit_scope(self.store, scope)
        commit_ns = time.monotonic_ns()
        with self._seq_lock:
            seq = self._seq
            self._seq += 1
            self.counters.updates += 1
            self.counters.modifications += len(modified)
        return modified, normalize_tasks(out), commit_ns, seq

    def log_commit(self, task, seq, grant_ns, release_ns, commit_ns):
        if self.record:
            rec = CommitRecord(self.me, seq, task[1], task[0], grant_ns, release_ns, commit_ns)
            with self._seq_lock:
                self.records.append(rec)

    def push(self, datums):
        n = push_modified(self.store, self.send, datums)
        if n:
            with self._count_lock:
                self.counters.datum_pushes += n
        return n

    # -- syncs -----------------------------------------------------------
    def sync_exchange(self, round_id, keys):
        """Fold owned vertices, merge at machine 0, publish the result everywhere."""
        partial = {k: fold_partial(self.program.sync(k), self.store) for k in keys}
        self.send(0, Kind.SYNC_PARTIAL, ("partial", round_id, partial))
        with self._sync_cond:
            while round_id not in self._sync_results:
                self.check_abort()
                self._sync_cond.wait(0.05)
            values, t_ns = self._sync_results.pop(round_id)
        self.globals.publish(values)
        self._sync_published.update(values)
        self.counters.syncs_run += 1
        for k in keys:
            self.sync_records.append(SyncRecord(k, values[k], t_ns, round_id))
        return values

    def _on_sync_partial(self, sender, obj):
        if obj[0] != "partial":
            return self.on_sync_control(sender, obj)
        _, round_id, partial = obj
        with self._sync_cond:
            group = self._sync_partials.setdefault(round_id, {})
            group[sender] = partial
            if len(group) < self.m:
                return
            del self._sync_partials[round_id]
        values = {}
        for key in group[0]:
            sd = self.program.sync(key)
            values[key] = sd.finalize(merge_partials(sd, [group[i][key] for i in range(self.m)]))
        t_ns = time.monotonic_ns()
        self.on_sync_finalized(round_id, values)
        for d in range(self.m):
            self.send(d, Kind.SYNC_RESULT, ("result", round_id, values, t_ns))

    def _on_sync_result(self, sender, obj):
        if obj[0] != "result":
            return self.on_sync_control(sender, obj)
        _, round_id, values, t_ns = obj
        with self._sync_cond:
            self._sync_results[round_id] = (values, t_ns)
            self._sync_cond.notify_all()

    def on_sync_control(self, sender, obj):
        pass

    def on_sync_finalized(self, round_id, values):
        pass

    # -- metrics ---------------------------------------------------------
    def sample_metrics(self):
        c = self.counters
        self.metrics_rows.append((self.me, int((time.monotonic() - self._t0) * 1000), c.updates,
                                  self.ep.sent, c.bytes_pushed, c.syncs_run))

    def start_sampler(self):
        self._sampler_stop = threading.Event()

        def loop():
            while not self._sampler_stop.wait(self.metrics_interval):
                self.sample_metrics()

        t = threading.Thread(target=loop, name=f"metrics-{self.me}", daemon=True)
        t.start()
        return t

    def stop_sampler(self):
        self._sampler_stop.set()
        self.sample_metrics()

    # -- results ---------------------------------------------------------
    def owned_state(self):
        """Owned vertex data and canonical edge copies (edges charged to the lower endpoint)."""
        st = self.store
        vertex = {v: st.vertex_data[v] for v in st.owned}
        edge = {}
        for (lo, hi), e in st._edge_ids.items():
            if st.vertex_owner[lo] == self.me:
                edge[2 * e] = st.edge_data[2 * e]
                edge[2 * e + 1] = st.edge_data[2 * e + 1]
        return vertex, edge


class SyncClock:
    """Decides when syncs fire from the global update count.

    Every crossed multiple of a sync's interval yields one firing; several
    crossings between two decision points fire back to back.
    """

    def __init__(self, syncs):
        self.tau = {sd.key: sd.tau for sd in syncs}
        self.next = dict(self.tau)
        self.last_total = 0

    def due(self, total):
        rounds = []
        while True:
            keys = sorted(k for k, t in self.next.items() if total >= t)
            if not keys:
                break
            for k in keys:
                self.next[k] += self.tau[k]
            rounds.append(keys)
        if rounds:
            self.last_total = total
        return rounds

    def final(self, total):
        """One closing round over every key if updates ran since the last firing."""
        if self.tau and total > self.last_total:
            self.last_total = total
            return [sorted(self.tau)]
        return []
