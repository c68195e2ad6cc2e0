"""Residual-scheduled loopy belief propagation on pairwise Potts MRFs."""
from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from ..engines.program import Program
from ..graph import build_graph

LBP = 0
EPSILON = 1e-10
SMOOTHING = 1.0


class LbpVertex(NamedTuple):
    unary: np.ndarray
    belief: np.ndarray


def potts(L, smoothing):
    return np.exp(-smoothing * (1.0 - np.eye(L)))


def _normalize(x):
    return x / x.sum()


def make_update(smoothing=SMOOTHING, epsilon=EPSILON):
    """Edge slot src -> dst holds the message from src to dst."""

    def lbp_update(v, scope, globals_):
        me = scope.data
        L = len(me.unary)
        psi = potts(L, smoothing)
        nbrs = scope.neighbors
        incoming = [np.asarray(scope.in_edge(u)) for u in nbrs]
        prod = me.unary.copy()
        for m in incoming:
            prod = prod * m
        scope.data = LbpVertex(me.unary, _normalize(prod))
        tasks = []
        for i, u in enumerate(nbrs):
            cavity = me.unary.copy()
            for j, m in enumerate(incoming):
                if j != i:
                    cavity = cavity * m
            new = _normalize(psi.T @ cavity)
            residual = float(np.max(np.abs(new - np.asarray(scope.out_edge(u)))))
            scope.set_out_edge(u, new)
            if residual > epsilon:
                tasks.append((LBP, u, residual))
        return tasks

    return lbp_update


def lbp_graph(n, edges, unaries):
    unaries = [np.asarray(u, dtype=float) for u in unaries]
    L = len(unaries[0])
    flat = np.full(L, 1.0 / L)
    return build_graph(n, edges, lambda v: LbpVertex(_normalize(unaries[v]), _normalize(unaries[v])),
                       lambda s, t: flat.copy())


def grid_edges(rows, cols):
    idx = lambda r, c: r * cols + c
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < rows:
                edges.append((idx(r, c), idx(r + 1, c)))
    return edges


def noisy_unaries(n, L, seed, strength=2.0):
    """Unaries favoring a random true label per vertex, with noise."""
    rng = np.random.default_rng(seed)
    truth = rng.integers(0, L, size=n)
    out = rng.uniform(0.5, 1.5, size=(n, L))
    out[np.arange(n), truth] *= strength
    return out / out.sum(axis=1, keepdims=True)


def lbp_program(g, smoothing=SMOOTHING, epsilon=EPSILON):
    return Program({LBP: make_update(smoothing, epsilon)},
                   [(LBP, v, 1.0) for v in range(g.num_vertices)], name="lbp")


def exact_marginals(n, edges, unaries, smoothing=SMOOTHING):
    """Brute-force marginals over all L^n joint states."""
    unaries = [np.asarray(u, dtype=float) / np.sum(u) for u in unaries]
    L = len(unaries[0])
    psi = potts(L, smoothing)
    marg = np.zeros((n, L))
    for x in itertools.product(range(L), repeat=n):
        p = 1.0
        for v in range(n):
            p *= unaries[v][x[v]]
        for a, b in edges:
            p *= psi[x[a], x[b]]
        for v in range(n):
            marg[v, x[v]] += p
    return marg / marg.sum(axis=1, keepdims=True)


def synchronous_bp(n, edges, unaries, smoothing=SMOOTHING, damping=0.5, tol=1e-13,
                   max_iter=100000):
    """Damped flooding-schedule BP; returns beliefs."""
    unaries = [np.asarray(u, dtype=float) / np.sum(u) for u in unaries]
    L = len(unaries[0])
    psi = potts(L, smoothing)
    nbrs = {v: [] for v in range(n)}
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    msg = {(a, b): np.full(L, 1.0 / L) for a in nbrs for b in nbrs[a]}
    for _ in range(max_iter):
        new = {}
        for (a, b) in msg:
            cav = unaries[a].copy()
            for w in nbrs[a]:
                if w != b:
                    cav = cav * msg[(w, a)]
            m = psi.T @ cav
            m = m / m.sum()
            new[(a, b)] = damping * msg[(a, b)] + (1 - damping) * m
        delta = max(np.max(np.abs(new[k] - msg[k])) for k in msg) if msg else 0.0
        msg = new
        if delta < tol:
            break
    beliefs = np.zeros((n, L))
    for v in range(n):
        b = unaries[v].copy()
        for w in nbrs[v]:
            b = b * msg[(w, v)]
        beliefs[v] = b / b.sum()
    return beliefs
