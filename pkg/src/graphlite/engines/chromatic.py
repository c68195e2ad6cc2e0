"""Color-phased engine: same-colored vertices run in parallel, barriers between colors."""
from __future__ import annotations

import queue
import threading
import time
from concurrent.futures import ThreadPoolExecutor

from ..coloring import required_order
from ..errors import InvalidColoring
from ..scheduler import SweepScheduler
from .runtime import Machine, SyncClock


def local_coloring_ok(store, order):
    """Check the coloring around every owned vertex (neighbors are held locally)."""
    if order == "zero":
        return True
    colors = store.colors
    for v in store.owned:
        nc = [colors[u] for u in store.neighbors(v)]
        if colors[v] in nc:
            return False
        if order == "second" and len(set(nc)) != len(nc):
            return False
    return True


class ChromaticMachine(Machine):
    def __init__(self, store, endpoint, program, model, workers=1, max_sweeps=1000,
                 time_budget=None, probe=None, **kw):
        super().__init__(store, endpoint, program, model, workers=workers, **kw)
        self.sched = SweepScheduler(store.colors)
        self.max_sweeps = max_sweeps
        self.time_budget = time_budget
        self.probe = probe
        self.clock = SyncClock(program.syncs)
        self.sweeps = 0
        self._pushq = queue.Queue()

    def add_local(self, tasks):
        self.sched.add_all(tasks)

    # background propagation of modified data
    def _pusher(self):
        while True:
            datums = self._pushq.get()
            try:
                if datums is None:
                    return
                self.push(datums)
            except Exception as exc:
                self.fail(exc)
            finally:
                self._pushq.task_done()

    def _run_slice(self, tasks):
        for task in tasks:
            if self.abort.is_set():
                return
            grant_ns = time.monotonic_ns()
            modified, new, commit_ns, seq = self.run_task(task)
            if modified:
                self._pushq.put(modified)
            self.route(new)
            self.log_commit(task, seq, grant_ns, time.monotonic_ns(), commit_ns)

    def _phase(self, pool, tasks):
        w = self.workers
        if w == 1 or len(tasks) <= 1:
            self._run_slice(tasks)
        else:
            futures = [pool.submit(self._run_slice, tasks[i::w]) for i in range(w)]
            for f in futures:
                f.result()
        self._pushq.join()
        self.check_abort()

    def _syncs(self, rounds, tag):
        for i, keys in enumerate(rounds):
            self.sync_exchange((tag, i), keys)

    def run(self):
        order = required_order(self.model)
        infos = self.barrier.enter(("color-check",),
                                   (local_coloring_ok(self.store, order),
                                    max((self.store.colors[v] for v in self.store.owned), default=-1)))
        if not all(ok for ok, _ in infos):
            raise InvalidColoring(f"coloring is not valid at {order} order for the {self.model} model")
        num_colors = max(c for _, c in infos) + 1
        self.add_local([t for t in self.program.initial_tasks
                        if self.store.vertex_owner[t[1]] == self.me])
        pusher = threading.Thread(target=self._pusher, name=f"pusher-{self.me}", daemon=True)
        pusher.start()
        self.start_sampler()
        deadline = None if self.time_budget is None else time.monotonic() + self.time_budget
        try:
            with ThreadPoolExecutor(self.workers, thread_name_prefix=f"chromatic-{self.me}") as pool:
                while self.sweeps < self.max_sweeps:
                    s = self.sweeps
                    for c in range(num_colors):
                        self._phase(pool, self.sched.pop_color(c))
                        infos = self.barrier.enter(("phase", s, c), self.counters.updates)
                        if self.probe is not None:
                            self.probe(self, s, c)
                        self._syncs(self.clock.due(sum(infos)), ("phase", s, c))
                    self.sched.end_sweep()
                    over = deadline is not None and time.monotonic() > deadline
                    infos = self.barrier.enter(("sweep", s), (self.sched.pending_count(), over))
                    self.sweeps += 1
                    if sum(p for p, _ in infos) == 0 or any(o for _, o in infos):
                        break
            infos = self.barrier.enter(("end",), self.counters.updates)
            self._syncs(self.clock.final(sum(infos)), ("final",))
        finally:
            self._pushq.put(None)
            self.stop_sampler()
        return self
