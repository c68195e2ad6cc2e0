"""Alternating least squares on a bipartite user/movie rating graph."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..engines.program import Program, SyncDefinition
from ..errors import SingularSystem
from ..graph import build_graph

ALS = 0
USER, MOVIE = 0, 1
LAMBDA = 0.05


class AlsVertex(NamedTuple):
    side: int
    latent: np.ndarray
    sq_err: float = 0.0


def solve_latent(neighbor_latents, ratings, lam=LAMBDA, d=None):
    """argmin_x sum (r_i - x . y_i)^2 + lam |x|^2 via the normal equations."""
    Y = np.asarray(neighbor_latents, dtype=float)
    r = np.asarray(ratings, dtype=float)
    if d is None:
        d = Y.shape[1]
    Y = Y.reshape(len(r), d)
    A = Y.T @ Y + lam * np.eye(d)
    b = Y.T @ r
    if np.linalg.matrix_rank(A) < d:
        raise SingularSystem(f"normal matrix has rank {np.linalg.matrix_rank(A)} < {d}; raise lambda")
    return np.linalg.solve(A, b)


def make_update(d, lam=LAMBDA, epsilon=None, resweep=True):
    """ALS vertex update.

    With ``epsilon`` set, neighbors are rescheduled when the latent vector
    moves more than epsilon (L-inf). Otherwise, with ``resweep``, the vertex
    reschedules itself so sweeps repeat until the engine's sweep limit.
    """

    def als_update(v, scope, globals_):
        nbrs = scope.neighbors
        Y = np.array([scope.vertex_data(u).latent for u in nbrs]).reshape(len(nbrs), d)
        r = np.array([scope.in_edge(u) for u in nbrs], dtype=float)
        x = solve_latent(Y, r, lam, d)
        resid = r - Y @ x
        old = scope.data
        scope.data = AlsVertex(old.side, x, float(resid @ resid))
        if epsilon is not None:
            if np.max(np.abs(x - old.latent), initial=0.0) > epsilon:
                return [(ALS, u) for u in nbrs]
            return []
        return [(ALS, v)] if resweep else []

    return als_update


def rmse_sync(n_ratings, tau=1):
    """Train RMSE from the per-user squared errors (each rating counted once)."""
    return SyncDefinition(
        "rmse",
        fold=lambda acc, v, data: acc + (data.sq_err if data.side == USER else 0.0),
        merge=lambda a, b: a + b,
        finalize=lambda acc: float(np.sqrt(acc / max(n_ratings, 1))),
        acc0=0.0, tau=tau)


def synthetic_ratings(n_users, n_movies, rank, seed, density=1.0):
    """Exactly low-rank ratings U0 V0^T; returns (rows of (user, movie, rating), U0, V0)."""
    rng = np.random.default_rng(seed)
    U0 = rng.normal(size=(n_users, rank))
    V0 = rng.normal(size=(n_movies, rank))
    R = U0 @ V0.T
    rows = []
    for i in range(n_users):
        for j in range(n_movies):
            if density >= 1.0 or rng.random() < density:
                rows.append((i, n_users + j, float(R[i, j])))
    return rows, U0, V0


def initial_latents(n, d, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, scale, size=(n, d))


def als_graph(n_users, n_movies, ratings, d, seed=0, init=None):
    n = n_users + n_movies
    init = initial_latents(n, d, seed) if init is None else np.asarray(init, dtype=float)
    rating = {}
    for u, m, r in ratings:
        rating[(u, m)] = rating[(m, u)] = float(r)
    pairs = [(u, m) for u, m, _ in ratings]
    return build_graph(
        n, pairs,
        lambda v: AlsVertex(USER if v < n_users else MOVIE, init[v].copy(), 0.0),
        lambda s, t: rating[(s, t)])


def als_program(g, d, lam=LAMBDA, epsilon=None, syncs=(), resweep=True):
    return Program({ALS: make_update(d, lam, epsilon, resweep)},
                   [(ALS, v) for v in range(g.num_vertices)], list(syncs), name="als")


def bipartite_coloring(g):
    return [int(g.vertex_data[v].side) for v in range(g.num_vertices)]


def train_rmse(g_or_data, edges, edge_data=None):
    """Exact RMSE of the current factorization over every rating."""
    if edge_data is None:
        vertex_data, edge_data = g_or_data.vertex_data, g_or_data.edge_data
    else:
        vertex_data = g_or_data
    err = 0.0
    for e, (a, b) in enumerate(edges):
        pred = float(vertex_data[a].latent @ vertex_data[b].latent)
        err += (edge_data[2 * e] - pred) ** 2
    return float(np.sqrt(err / max(len(edges), 1)))


def objective(vertex_data, edges, edge_data, lam=LAMBDA):
    """Regularized squared error that ALS sweeps never increase."""
    err = 0.0
    for e, (a, b) in enumerate(edges):
        err += (edge_data[2 * e] - float(vertex_data[a].latent @ vertex_data[b].latent)) ** 2
    return err + lam * sum(float(x.latent @ x.latent) for x in vertex_data)
