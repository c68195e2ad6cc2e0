import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from graphlite.scheduler import (SweepScheduler, UpdateTask, add_task, make_scheduler,
                                 pending_count, remove_next)

T = UpdateTask


def test_fifo_dedup_and_order():
    s = make_scheduler("fifo")
    add_task(s, T(0, 3))
    add_task(s, T(0, 3))
    assert pending_count(s) == 1
    add_task(s, T(0, 1))
    add_task(s, T(0, 2))
    assert remove_next(s) == T(0, 3)
    assert remove_next(s) == T(0, 1)


@pytest.mark.parametrize("first,second", [(1.0, 5.0), (5.0, 1.0)])
def test_priority_max_merge(first, second):
    s = make_scheduler("priority")
    add_task(s, T(0, 3), first)
    add_task(s, T(0, 3), second)
    assert s.priority(T(0, 3)) == 5.0
    assert pending_count(s) == 1


def test_priority_picks_max_then_lower_id():
    s = make_scheduler("priority")
    add_task(s, T(0, 1), 0.5)
    add_task(s, T(0, 2), 9.0)
    assert remove_next(s) == T(0, 2)
    add_task(s, T(0, 7), 0.5)
    assert remove_next(s) == T(0, 1)
    assert remove_next(s) == T(0, 7)


@pytest.mark.parametrize("kind", ["fifo", "priority", "sweep"])
def test_empty_and_counts(kind):
    s = make_scheduler(kind)
    assert pending_count(s) == 0
    assert remove_next(s) is None
    for v in range(3):
        add_task(s, T(0, v))
    assert pending_count(s) == 3
    s2 = make_scheduler(kind)
    for _ in range(3):
        add_task(s2, T(0, 4))
    assert pending_count(s2) == 1


def test_sweep_canonical_order():
    s = SweepScheduler(colors=[1, 0, 1, 0])
    for v in (3, 2, 1, 0):
        add_task(s, T(0, v))
    assert [remove_next(s).vertex for _ in range(4)] == [1, 3, 0, 2]


def test_sweep_defers_tasks_behind_cursor():
    s = SweepScheduler(colors=[0, 1, 0])
    s.add_all([(0, 0), (0, 1), (0, 2)])
    assert [t.vertex for t in s.pop_color(0)] == [0, 2]
    add_task(s, T(0, 0))  # behind the cursor: next sweep
    assert [t.vertex for t in s.pop_color(1)] == [1]
    assert s.pop_color(0) == []
    s.end_sweep()
    assert [t.vertex for t in s.pop_color(0)] == [0]


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_scheduler("lifo")


ops = st.lists(st.tuples(st.booleans(), st.integers(0, 15), st.floats(0, 10)), max_size=200)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["fifo", "priority", "sweep"]), ops)
def test_no_lost_tasks(kind, trace):
    s = make_scheduler(kind, colors=[v % 3 for v in range(16)])
    pending = set()
    added, removed = set(), []
    for is_add, v, pr in trace:
        if is_add:
            add_task(s, T(0, v), pr)
            pending.add(v)
            added.add(v)
        else:
            t = remove_next(s)
            if pending:
                assert t is not None and t.vertex in pending
                pending.discard(t.vertex)
                removed.append(t.vertex)
            else:
                assert t is None
        assert pending_count(s) == len(pending)
    while (t := remove_next(s)) is not None:
        removed.append(t.vertex)
    assert set(removed) == added


def test_priority_against_sorted_oracle():
    rng = random.Random(7)
    s = make_scheduler("priority")
    ref = {}
    for _ in range(10_000):
        if rng.random() < 0.6:
            v, pr = rng.randrange(200), rng.random()
            add_task(s, T(0, v), pr)
            ref[v] = max(ref.get(v, pr), pr)
        else:
            t = remove_next(s)
            if not ref:
                assert t is None
                continue
            best = max(ref.values())
            expect = min(v for v, p in ref.items() if p == best)
            assert t == T(0, expect)
            del ref[expect]


def test_fifo_order_distinct():
    s = make_scheduler("fifo")
    order = random.Random(3).sample(range(500), 500)
    for v in order:
        add_task(s, T(0, v))
    assert [remove_next(s).vertex for _ in order] == order


@pytest.mark.parametrize("kind", ["fifo", "priority", "sweep"])
def test_concurrent_add_remove(kind):
    s = make_scheduler(kind)
    got = []
    lock = threading.Lock()

    def producer(base):
        for i in range(2000):
            add_task(s, T(0, base + i), float(i))

    def consumer():
        while True:
            t = remove_next(s)
            if t is None:
                if done.is_set() and pending_count(s) == 0:
                    return
                continue
            with lock:
                got.append(t.vertex)

    done = threading.Event()
    prods = [threading.Thread(target=producer, args=(k * 10_000,)) for k in range(4)]
    cons = [threading.Thread(target=consumer) for _ in range(4)]
    for t in prods + cons:
        t.start()
    for t in prods:
        t.join()
    done.set()
    for t in cons:
        t.join()
    assert sorted(got) == sorted(k * 10_000 + i for k in range(4) for i in range(2000))
