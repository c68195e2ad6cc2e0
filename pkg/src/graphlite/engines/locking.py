"""Lock-based engine: pipelined scope acquisition, task forwarding, token-ring termination."""
from __future__ import annotations

import queue
import threading
import time

from ..comm.ghosts import DataPush, apply_push, snapshot
from ..comm.termination import TermToken, detect_termination
from ..comm.transport import Kind
from ..graph import edatum, vdatum
from ..locks import LockPipeline, LockTable, Mode, plan_locks
from ..scheduler import make_scheduler
from .runtime import Machine, SyncClock


class DistributedLockService:
    """Sends each lock of a plan to the owner of its vertex.

    Remote grants carry fresh copies of the locked vertex and of the edge
    slots between it and the requesting scope's center, limited to data
    newer than what the requester already holds.
    """

    def __init__(self, machine):
        self.machine = machine
        self.table = machine.table
        self._pending = {}
        self._lock = threading.Lock()

    def _owner(self, v):
        return self.machine.store.vertex_owner[v]

    def _fresh_datums(self, vertex, center):
        st = self.machine.store
        out = [vdatum(vertex)]
        if center is not None and center != vertex:
            out.append(edatum(st.slot(vertex, center)))
            out.append(edatum(st.slot(center, vertex)))
        return out

    def acquire(self, ticket, i, on_granted):
        m = self.machine
        entry = ticket.plan[i]
        owner = self._owner(entry.vertex)
        if owner == m.me:
            return self.table.request(entry.vertex, entry.mode, (m.me, ticket.id, i), on_granted)
        with self._lock:
            self._pending[(ticket.id, i)] = on_granted
        st = m.store
        known = {d: st.version(d) for d in self._fresh_datums(entry.vertex, ticket.center)}
        m.send(owner, Kind.LOCK_REQUEST,
               (ticket.id, i, entry.vertex, entry.mode.value, ticket.center, known))
        return False

    def release(self, ticket, i):
        m = self.machine
        v = ticket.plan[i].vertex
        owner = self._owner(v)
        if owner == m.me:
            self.table.release(v, (m.me, ticket.id, i))
        else:
            m.send(owner, Kind.LOCK_RELEASE, (ticket.id, i, v))

    # owner side
    def on_request(self, sender, obj):
        tid, i, vertex, mode, center, known = obj
        m = self.machine

        def grant():
            pushes = []
            for d, ver in known.items():
                p = snapshot(m.store, d)
                if p.version > ver:
                    pushes.append(tuple(p))
            m.send(sender, Kind.LOCK_GRANT, (tid, i, pushes))

        if self.table.request(vertex, Mode(mode), (sender, tid, i), grant):
            grant()

    def on_grant(self, sender, obj):
        tid, i, pushes = obj
        for p in pushes:
            apply_push(self.machine.store, DataPush(*p))
        with self._lock:
            cb = self._pending.pop((tid, i))
        cb()

    def on_release(self, sender, obj):
        tid, i, vertex = obj
        self.table.release(vertex, (sender, tid, i))


class LockingMachine(Machine):
    def __init__(self, store, endpoint, program, model, workers=1, scheduler="fifo",
                 maxpending=100, record_grants=False, poll=0.002, **kw):
        super().__init__(store, endpoint, program, model, workers=workers, **kw)
        self.sched = make_scheduler(scheduler, store.colors if scheduler == "sweep" else None)
        self.maxpending = maxpending
        self.table = LockTable(record=record_grants)
        self.service = DistributedLockService(self)
        self.poll = poll
        self.clock = SyncClock(program.syncs)
        self._state = threading.Condition()
        self._outstanding = 0
        self._paused = False
        self._stop = False
        self._control = queue.Queue()
        self._reported = [0] * self.m  # machine 0: per-machine update counts
        self._sync_round = 0
        self._terminated = threading.Event()

    # -- scheduler / idleness -------------------------------------------
    def add_local(self, tasks):
        self.sched.add_all(tasks)
        with self._state:
            self._state.notify_all()

    def idle(self):
        with self._state:
            return (not self._paused and self._outstanding == 0
                    and self.sched.pending_count() == 0)

    def _take(self):
        with self._state:
            if self._paused or self._stop:
                return None
            task = self.sched.remove_next()
            if task is not None:
                self._outstanding += 1
            return task

    # -- message handlers ---------------------------------------------
    def _on_lock_request(self, sender, obj):
        self.service.on_request(sender, obj)

    def _on_lock_grant(self, sender, obj):
        self.service.on_grant(sender, obj)

    def _on_lock_release(self, sender, obj):
        self.service.on_release(sender, obj)

    def _on_token(self, sender, token):
        self._control.put(("token", token))

    def on_sync_control(self, sender, obj):
        if obj[0] == "count":
            self._reported[sender] = max(self._reported[sender], obj[1])
            self._control.put(("count",))
        elif obj[0] == "request":
            self._control.put(("sync", obj[1], obj[2]))

    # -- workers ---------------------------------------------------------
    def _worker(self, idx):
        pl = LockPipeline(self.service, self.maxpending)
        try:
            while True:
                if self.abort.is_set():
                    return
                while pl.has_capacity():
                    task = self._take()
                    if task is None:
                        break
                    plan = plan_locks(self.store, task.vertex, self.model)
                    pl.request_scope(plan, task, block=False)
                ready = pl.wait_ready(timeout=self.poll)
                for ticket in ready:
                    self._execute(pl, ticket)
                if not ready and pl.inflight == 0:
                    with self._state:
                        if self._stop:
                            return
                        if self._paused or self.sched.pending_count() == 0:
                            self._state.wait(self.poll)
        except Exception as exc:
            self.fail(exc)

    def _execute(self, pl, ticket):
        task = ticket.task
        modified, new, commit_ns, seq = self.run_task(task)
        # replicas learn new data before anyone else can lock it
        self.push(modified)
        release_ns = time.monotonic_ns()
        pl.release_scope(ticket)
        self.log_commit(task, seq, ticket.grant_ns, release_ns, commit_ns)
        self.route(new)
        if self.program.syncs:
            self.send(0, Kind.SYNC_PARTIAL, ("count", self.counters.updates))
        with self._state:
            self._outstanding -= 1
            self._state.notify_all()

    # -- syncs -----------------------------------------------------------
    def _run_sync(self, round_id, keys):
        with self._state:
            self._paused = True
            while self._outstanding and not self.abort.is_set():
                self._state.wait(self.poll)
        self.check_abort()
        self.barrier.enter(("sync", round_id))
        self.sync_exchange(("sync", round_id), keys)
        with self._state:
            self._paused = False
            self._state.notify_all()

    def _maybe_start_sync(self):
        """Machine 0: launch one sync round if the global counter crossed a threshold."""
        if self._sync_active or self._terminated.is_set():
            return
        rounds = self.clock.due(sum(self._reported))
        if not rounds:
            return
        # extra crossings fire on the following checks
        for keys in rounds[1:]:
            for k in keys:
                self.clock.next[k] -= self.clock.tau[k]
        self._sync_active = True
        self._sync_round += 1
        for d in range(self.m):
            self.send(d, Kind.SYNC_RESULT, ("request", self._sync_round, rounds[0]))

    # -- control loop -----------------------------------------------------
    def _counts(self):
        with self._count_lock:
            return self.counters.basic_sent, self.counters.basic_recv

    def _control_loop(self):
        self._sync_active = False
        held = None
        while not self._terminated.is_set():
            self.check_abort()
            try:
                item = self._control.get(timeout=self.poll)
            except queue.Empty:
                item = None
            if item is not None:
                kind = item[0]
                if kind == "sync":
                    self._run_sync(item[1], item[2])
                    if self.me == 0:
                        self._sync_active = False
                elif kind == "token":
                    if item[1].terminate:
                        self._terminated.set()
                        break
                    held = item[1]
            if self.me == 0:
                self._maybe_start_sync()
                if self._sync_active:
                    continue
                if self.m == 1:
                    if self.idle() and detect_termination(True, self._counts()):
                        self._finish_ring()
                    continue
            if not self.idle():
                continue
            sent, recv = self._counts()
            if self.me == 0:
                if held is not None:
                    tok, held = held, None
                    if detect_termination(True, (sent, recv), self.detector, tok):
                        self._finish_ring()
                        continue
                if not self.detector.outstanding:
                    self.send(1, Kind.TERM_TOKEN, self.detector.open_ring(sent, recv))
            elif held is not None:
                tok, held = held, None
                self.send(self.detector.next_hop, Kind.TERM_TOKEN, self.detector.stamp(tok, sent, recv))

    def _finish_ring(self):
        self._terminated.set()
        for d in range(1, self.m):
            self.send(d, Kind.TERM_TOKEN, TermToken(self.detector.rounds, terminate=True))

    def run(self):
        self.add_local([t for t in self.program.initial_tasks
                        if self.store.vertex_owner[t[1]] == self.me])
        self.start_sampler()
        threads = [threading.Thread(target=self._worker, args=(i,), daemon=True,
                                    name=f"locking-{self.me}-{i}") for i in range(self.workers)]
        for t in threads:
            t.start()
        try:
            self._control_loop()
        finally:
            with self._state:
                self._stop = True
                self._state.notify_all()
            for t in threads:
                t.join()
        self.check_abort()
        infos = self.barrier.enter(("end",), self.counters.updates)
        total = sum(infos)
        if self.me == 0:
            plan = self.clock.due(total) + self.clock.final(total)
        else:
            plan = None
        plan = self.barrier.enter(("end-plan",), plan)[0]
        for i, keys in enumerate(plan):
            self.sync_exchange(("end", i), keys)
        self.stop_sampler()
        return self
