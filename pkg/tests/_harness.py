"""Shared stress and simulation drivers for the lock and termination tests."""
import random
import threading
import time
from collections import deque

from graphlite.comm.termination import TerminationDetector
from graphlite.graph import build_graph
from graphlite.locks import LocalLockService, LockPipeline, LockTable, check_grant_log, plan_locks


def lock_stress(n_scopes=10_000, workers=8, maxpending=100, n_vertices=300, seed=0,
                model="edge", hold_s=0.0, timeout=120.0):
    """Run random overlapping scope acquisitions; returns (wall seconds, table, completed)."""
    rng = random.Random(seed)
    edges = {(min(u, v), max(u, v)) for u, v in
             ((rng.randrange(n_vertices), rng.randrange(n_vertices)) for _ in range(3 * n_vertices))
             if u != v}
    g = build_graph(n_vertices, sorted(edges))
    table = LockTable(record=True)
    service = LocalLockService(table)
    centers = [rng.randrange(n_vertices) for _ in range(n_scopes)]
    per_worker = [deque(centers[i::workers]) for i in range(workers)]
    done = [0] * workers
    errors = []

    def worker(i):
        pl = LockPipeline(service, maxpending)
        todo = per_worker[i]
        held = 0
        try:
            while todo or held or pl.inflight:
                while todo and pl.has_capacity():
                    v = todo.popleft()
                    pl.request_scope(plan_locks(g, v, model), center=v)
                    held += 1
                for ticket in pl.wait_ready(timeout=0.01):
                    if hold_s:
                        time.sleep(hold_s)
                    pl.release_scope(ticket)
                    held -= 1
                    done[i] += 1
        except Exception as exc:  # pragma: no cover - surfaced by the caller
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,), daemon=True) for i in range(workers)]
    t0 = time.monotonic()
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout)
    wall = time.monotonic() - t0
    if errors:
        raise errors[0]
    hung = any(t.is_alive() for t in threads)
    return wall, table, sum(done), hung


def grant_conflicts(table):
    return check_grant_log(table.log)


def termination_trial(seed, m=None, max_steps=200_000):
    """Seeded discrete-event run of the token ring against task-spawning messages.

    Returns (terminated_early, rings_after_quiescence). A message always
    turns into a task on delivery and a task may send further messages, so
    a detector that halts while anything is queued or in flight is wrong.
    """
    rng = random.Random(seed)
    m = m or rng.randint(2, 6)
    det = [TerminationDetector(i, m) for i in range(m)]
    tasks = [0] * m
    sent = [0] * m
    recv = [0] * m
    inflight = []  # basic messages: destination ids
    token_at = None  # (machine, token) waiting to be handled
    tokens_in_flight = []
    budget = rng.randint(5, 200)
    for i in range(m):
        tasks[i] = rng.randint(0, 3)
    quiet_round = None
    for _ in range(max_steps):
        quiescent = not inflight and not any(tasks)
        if quiescent and quiet_round is None:
            quiet_round = det[0].rounds
        actions = []
        if inflight:
            actions.append("deliver")
        if any(tasks):
            actions.append("work")
        if tokens_in_flight:
            actions.append("token")
        if token_at is None and not tokens_in_flight and not det[0].outstanding and tasks[0] == 0:
            actions.append("open")
        if not actions:
            actions.append("token")
        act = rng.choice(actions)
        if act == "deliver":
            dst = inflight.pop(rng.randrange(len(inflight)))
            recv[dst] += 1
            tasks[dst] += 1
            det[dst].mark_dirty()
        elif act == "work":
            i = rng.choice([j for j in range(m) if tasks[j]])
            tasks[i] -= 1
            spawn = rng.randint(0, 2) if budget > 0 else 0
            for _ in range(spawn):
                budget -= 1
                inflight.append(rng.randrange(m))
                sent[i] += 1
        elif act == "open":
            tokens_in_flight.append((1 % m, det[0].open_ring(sent[0], recv[0])))
        elif act == "token" and tokens_in_flight:
            dst, tok = tokens_in_flight[0]
            if tasks[dst]:
                continue  # a busy machine holds the token until it goes passive
            tokens_in_flight.pop(0)
            if dst == 0:
                if det[0].close_ring(tok, sent[0], recv[0]):
                    early = bool(inflight) or any(tasks)
                    rings = det[0].rounds - (quiet_round if quiet_round is not None else det[0].rounds)
                    return early, rings
            else:
                tokens_in_flight.append(((dst + 1) % m, det[dst].stamp(tok, sent[dst], recv[dst])))
    raise RuntimeError(f"trial {seed} did not terminate in {max_steps} steps")
