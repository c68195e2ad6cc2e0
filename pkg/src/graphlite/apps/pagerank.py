"""PageRank with dynamic rescheduling of neighbors."""
from __future__ import annotations

import numpy as np

from ..codec import FloatCodec
from ..engines.program import Program, SyncDefinition
from ..graph import build_graph

ALPHA = 0.15
EPSILON = 1e-5
PAGERANK = 0


def normalize_links(links):
    """Row-normalize directed links ``(src, dst[, w])``: out-weights of each source sum to 1."""
    out = {}
    for link in links:
        src, dst = link[0], link[1]
        w = 1.0 if len(link) < 3 or link[2] is None else float(link[2])
        if w < 0:
            raise ValueError(f"negative link weight on {src}->{dst}")
        out[(src, dst)] = out.get((src, dst), 0.0) + w
    totals = {}
    for (src, _), w in out.items():
        totals[src] = totals.get(src, 0.0) + w
    return {(s, d): w / totals[s] for (s, d), w in out.items() if totals[s] > 0}


def pagerank_graph(n, links, normalize=True):
    """Undirected structure over the links; slot u->v holds w(u, v), 0 for absent directions."""
    weights = normalize_links(links) if normalize else {(s, d): float(w) for s, d, w in links}
    pairs = sorted({(min(s, d), max(s, d)) for s, d in weights})
    return build_graph(n, pairs, lambda v: 1.0 / n,
                       lambda s, d: weights.get((s, d), 0.0), codec=FloatCodec())


def make_update(n, alpha=ALPHA, epsilon=EPSILON):
    def pagerank_update(v, scope, globals_):
        old = scope.data
        total = 0.0
        for u in scope.neighbors:
            total += scope.in_edge(u) * scope.vertex_data(u)
        new = alpha / n + (1.0 - alpha) * total
        scope.data = new
        delta = abs(new - old)
        if delta > epsilon:
            return [(PAGERANK, u, delta) for u in scope.neighbors]
        return []

    return pagerank_update


def rank_sum_sync(tau=1000):
    return SyncDefinition("rank_sum", fold=lambda acc, v, r: acc + r,
                          merge=lambda a, b: a + b, acc0=0.0, tau=tau)


def pagerank_program(g, alpha=ALPHA, epsilon=EPSILON, syncs=()):
    n = g.num_vertices
    return Program({PAGERANK: make_update(n, alpha, epsilon)},
                   [(PAGERANK, v, 1.0) for v in range(n)], list(syncs), name="pagerank")


def power_iteration(n, links, alpha=ALPHA, tol=1e-15, max_iter=100000):
    """Dense reference fixed point of R = alpha/n + (1 - alpha) W^T R."""
    W = np.zeros((n, n))
    for (s, d), w in normalize_links(links).items():
        W[s, d] = w
    r = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = alpha / n + (1.0 - alpha) * (W.T @ r)
        if np.max(np.abs(nxt - r)) < tol:
            return nxt
        r = nxt
    return r


def random_links(n, p, seed):
    """Directed Erdos-Renyi links plus a ring, so the link graph is strongly connected."""
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    for v in range(n):
        mask[v, (v + 1) % n] = True
    src, dst = np.nonzero(mask)
    return [(int(s), int(d)) for s, d in zip(src, dst)]
