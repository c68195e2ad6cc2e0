import random

import numpy as np
import pytest

from graphlite.apps import pagerank
from graphlite.apps.counter import counter_graph, counter_program
from graphlite.coloring import Coloring, greedy_color
from graphlite.engines import (Program, SyncClock, SyncDefinition, audit_result,
                               audit_serializability, read_log, run_chromatic, run_locking,
                               run_sync, write_log)
from graphlite.engines.log import LogFormatError
from graphlite.errors import InvalidColoring
from graphlite.graph import build_graph
from graphlite.partition import distribute

from conftest import path_graph, random_edges


def top_two_sync(tau=1):
    """Tracks the two largest values; publishes the second."""
    def fold(acc, v, x):
        return tuple(sorted(acc + (float(x),), reverse=True)[:2])

    def merge(a, b):
        return tuple(sorted(a + b, reverse=True)[:2])

    return SyncDefinition("top_two", fold, merge, finalize=lambda acc: acc[1], acc0=(), tau=tau)


def int_sum_sync(key="total", tau=1):
    return SyncDefinition(key, lambda acc, v, x: acc + int(x), lambda a, b: a + b, acc0=0, tau=tau)


def climb_program(n, target=5, syncs=()):
    """Each vertex counts itself up to ``target`` one step per update."""
    def climb(v, scope, globals_):
        scope.data = scope.data + 1
        return [(0, v)] if scope.data < target else []
    return Program({0: climb}, [(0, v) for v in range(n)], list(syncs))


def pr_setup(n=60, p=0.08, seed=3, eps=1e-10, syncs=()):
    links = pagerank.random_links(n, p, seed)
    g = pagerank.pagerank_graph(n, links)
    return g, pagerank.pagerank_program(g, epsilon=eps, syncs=syncs), links


# -- sync ----------------------------------------------------------------------

def test_top_two_example():
    g = build_graph(3, [(0, 1), (1, 2)], lambda v: [0.5, 0.3, 0.2][v])
    assert run_sync(top_two_sync(), g) == 0.3


def test_sum_over_empty_machine_is_acc0():
    g = path_graph(3, lambda v: v + 1)
    locals_ = distribute(g, machines=2, k=2)
    from graphlite.engines.sync import fold_partial
    sd = int_sum_sync()
    assert fold_partial(sd, locals_[0], []) == 0
    assert run_sync(sd, locals_) == 6 == run_sync(sd, g)


@pytest.mark.parametrize("m", [1, 2, 4])
def test_distributed_sync_matches_single_fold(m):
    rng = random.Random(m)
    n = 40
    g = build_graph(n, random_edges(n, 0.1, rng), lambda v: rng.randint(-50, 50))
    locals_ = distribute(g, machines=m, k=8)
    for sd in (int_sum_sync(), top_two_sync()):
        assert run_sync(sd, locals_) == run_sync(sd, g)


def test_sync_clock_catch_up_and_final():
    clock = SyncClock([int_sum_sync("a", tau=10), int_sum_sync("b", tau=25)])
    assert clock.due(9) == []
    assert clock.due(30) == [["a", "b"], ["a"], ["a"]]
    assert clock.final(30) == []
    assert clock.final(31) == [["a", "b"]]
    with pytest.raises(ValueError):
        SyncDefinition("x", None, None, tau=0)


# -- chromatic -----------------------------------------------------------------

def test_pagerank_three_cycle():
    g = pagerank.pagerank_graph(3, [(0, 1), (1, 2), (2, 0)])
    res = run_chromatic(g, pagerank.pagerank_program(g, epsilon=1e-10))
    assert np.allclose(res.vertex_data, 1 / 3, atol=1e-9)


def test_identity_program_halts_after_one_sweep():
    g = path_graph(5, lambda v: float(v))
    prog = Program({0: lambda v, s, t: None}, [(0, v) for v in range(5)])
    res = run_chromatic(g, prog, machines=2)
    assert res.vertex_data == g.vertex_data and res.sweeps == 1
    assert res.modifications == 0 and res.datum_pushes == 0


def test_invalid_coloring_rejected():
    g, prog, _ = pr_setup(n=20)
    with pytest.raises(InvalidColoring):
        run_chromatic(g, prog, coloring=Coloring.from_list([0] * 20))
    with pytest.raises(InvalidColoring):
        run_chromatic(g, prog, model="full", coloring=greedy_color(g), machines=2)


def test_chromatic_determinism_and_probe():
    g, prog, links = pr_setup()
    ref = None
    for m in (1, 2, 3):
        for w in (1, 4):
            res = run_chromatic(g, prog, machines=m, workers=w, k=12, probe=True, seed=m * 7 + w)
            assert res.probe_mismatches == []
            assert res.datum_pushes <= res.modifications
            if ref is None:
                ref = res
            assert res.vertex_data == ref.vertex_data and res.edge_data == ref.edge_data
    oracle = pagerank.power_iteration(60, links)
    assert np.max(np.abs(np.array(ref.vertex_data) - oracle)) <= 1e-6


def test_chromatic_max_sweeps_and_budget():
    prog = climb_program(4, target=100)
    res = run_chromatic(path_graph(4), prog, max_sweeps=3)
    assert res.sweeps == 3 and res.vertex_data == [3, 3, 3, 3]
    res = run_chromatic(path_graph(4), prog, time_budget=0.0)
    assert res.sweeps == 1


@pytest.mark.parametrize("m", [1, 2, 4])
def test_chromatic_sync_firings(m):
    g = path_graph(12, lambda v: 0)
    sd = int_sum_sync(tau=7)
    res = run_chromatic(g, climb_program(12, 5, [sd]), machines=m, k=4, workers=2)
    assert res.updates == 60
    fired = res.syncs_fired("total")
    assert abs(fired - res.updates // 7) <= m
    assert res.globals["total"] == 60
    verdict = audit_result(res, climb_program(12, 5, [sd]), g, "edge")
    assert verdict.ok and verdict.syncs_checked == fired


def test_chromatic_audit_eight_workers():
    g, prog, _ = pr_setup(n=40, eps=1e-6)
    res = run_chromatic(g, prog, machines=2, workers=8)
    assert audit_result(res, prog, g, "edge").ok


# -- locking -------------------------------------------------------------------

def test_locking_empty_task_set():
    g = path_graph(4)
    res = run_locking(g, Program({0: lambda v, s, t: None}, []), machines=2)
    assert res.updates == 0 and res.records == []


@pytest.mark.parametrize("scheduler", ["fifo", "priority", "sweep"])
def test_locking_pagerank_matches_chromatic(scheduler):
    g, prog, links = pr_setup(n=40, eps=1e-9)
    a = run_chromatic(g, prog)
    b = run_locking(g, prog, scheduler=scheduler, machines=2, workers=2, seed=4)
    assert np.max(np.abs(np.array(a.vertex_data) - np.array(b.vertex_data))) <= 1e-6
    assert audit_result(b, prog, g, "edge").ok


@pytest.mark.parametrize("maxpending", [0, 1, 100])
def test_locking_full_model_counter_is_exact(maxpending):
    g = counter_graph(12)
    prog = counter_program(g, delay=0.0)
    res = run_locking(g, prog, model="full", machines=2, workers=3, maxpending=maxpending,
                      record_grants=True)
    assert res.vertex_data[0] == 12
    assert audit_result(res, prog, g, "full").ok


@pytest.mark.parametrize("m", [1, 2, 4])
def test_locking_sync_firings(m):
    g = path_graph(16, lambda v: 0)
    sd = int_sum_sync(tau=9)
    prog = climb_program(16, 6, [sd])
    res = run_locking(g, prog, machines=m, workers=2, k=4, seed=m)
    assert res.updates == 96 and res.globals["total"] == 96
    assert abs(res.syncs_fired("total") - res.updates // 9) <= m
    assert audit_result(res, prog, g, "edge").ok


def test_unsafe_counter_fails_audit():
    g = counter_graph(20)
    prog = counter_program(g)
    res = run_locking(g, prog, model="none", machines=2, workers=4)
    verdict = audit_result(res, prog, g, "none")
    assert not verdict.ok and verdict.first_violation


# -- audit & log ---------------------------------------------------------------

def test_tampered_final_state_detected():
    g, prog, _ = pr_setup(n=30, eps=1e-6)
    res = run_locking(g, prog, machines=2)
    data = list(res.vertex_data)
    data[5] = data[5] + 1e-3
    verdict = audit_serializability(res.records, res.sync_records, prog, g, data, res.edge_data,
                                    "edge", res.owners)
    assert not verdict.ok and verdict.mismatch.datum == ("v", 5)


def test_log_roundtrip_and_truncation(tmp_path):
    g = path_graph(6, lambda v: 0)
    sd = int_sum_sync(tau=5)
    prog = climb_program(6, 4, [sd])
    res = run_locking(g, prog, machines=2)
    path = tmp_path / "log.ndjson"
    write_log(path, res.records, res.sync_records, {"model": "edge"})
    header, records, syncs = read_log(path)
    assert header["model"] == "edge" and records == res.records
    assert [s.value for s in syncs] == [s.value for s in res.sync_records]
    text = path.read_text().splitlines()
    (tmp_path / "cut.ndjson").write_text("\n".join(text[:-2]) + "\n")
    with pytest.raises(LogFormatError):
        read_log(tmp_path / "cut.ndjson")


def test_commit_sequence_strictly_increasing():
    g, prog, _ = pr_setup(n=30, eps=1e-6)
    res = run_locking(g, prog, machines=3, workers=3)
    for mc in range(3):
        seqs = [r.seq for r in sorted(res.records, key=lambda r: r.commit_ns) if r.machine == mc]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
