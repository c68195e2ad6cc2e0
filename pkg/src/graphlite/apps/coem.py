"""CoEM label propagation between noun phrases and contexts."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..engines.program import Program
from ..errors import ZeroMass
from ..graph import build_graph

COEM = 0
PHRASE, CONTEXT = 0, 1
EPSILON = 1e-10


class CoemVertex(NamedTuple):
    side: int
    dist: np.ndarray
    seed: bool = False


def make_update(epsilon=EPSILON):
    def coem_update(v, scope, globals_):
        me = scope.data
        if me.seed:
            return []
        acc = np.zeros_like(me.dist)
        for u in scope.neighbors:
            acc = acc + scope.in_edge(u) * scope.vertex_data(u).dist
        mass = acc.sum()
        if not mass > 0:
            raise ZeroMass(f"vertex {v}: every neighbor distribution is zero")
        new = acc / mass
        scope.data = CoemVertex(me.side, new, False)
        if np.abs(new - me.dist).sum() > epsilon:
            return [(COEM, u) for u in scope.neighbors]
        return []

    return coem_update


def coem_graph(n_phrases, n_contexts, counts, n_types, seeds):
    """``counts``: (phrase, context vertex, count); ``seeds``: vertex -> type index or distribution."""
    n = n_phrases + n_contexts
    uniform = np.full(n_types, 1.0 / n_types)

    def vinit(v):
        side = PHRASE if v < n_phrases else CONTEXT
        if v in seeds:
            s = seeds[v]
            dist = np.eye(n_types)[s] if np.isscalar(s) else np.asarray(s, dtype=float)
            return CoemVertex(side, dist, True)
        return CoemVertex(side, uniform.copy(), False)

    weight = {}
    for p, c, k in counts:
        if int(k) < 1:
            raise ValueError(f"co-occurrence count must be >= 1, got {k}")
        weight[(p, c)] = weight[(c, p)] = float(k)
    return build_graph(n, [(p, c) for p, c, _ in counts], vinit, lambda s, t: weight[(s, t)])


def coem_program(g, epsilon=EPSILON):
    return Program({COEM: make_update(epsilon)},
                   [(COEM, v) for v in range(g.num_vertices) if not g.vertex_data[v].seed],
                   name="coem")


def dense_oracle(g, tol=1e-15, max_iter=1_000_000):
    """Jacobi iteration of the weighted-average map to its fixed point."""
    n = g.num_vertices
    W = np.zeros((n, n))
    for e, (a, b) in enumerate(g.edges):
        W[a, b] = g.edge_data[2 * e + 1]  # b -> a count, symmetric
        W[b, a] = g.edge_data[2 * e]
    D = np.array([g.vertex_data[v].dist for v in range(n)], dtype=float)
    seed = np.array([g.vertex_data[v].seed for v in range(n)])
    for _ in range(max_iter):
        acc = W @ D
        nxt = np.where(seed[:, None], D, acc / acc.sum(axis=1, keepdims=True))
        if np.max(np.abs(nxt - D)) < tol:
            return nxt
        D = nxt
    return D
