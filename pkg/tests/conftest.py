import random

import pytest

from graphlite.graph import build_graph


def path_graph(n=3, init=None):
    return build_graph(n, [(i, i + 1) for i in range(n - 1)], init or (lambda v: 0.0))


def random_edges(n, p, rng):
    return [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    # exposes the call-phase outcome to fixtures (used by the acceptance report)
    outcome = yield
    rep = outcome.get_result()
    setattr(item, "rep_" + rep.when, rep)
