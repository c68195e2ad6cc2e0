"""scikit-learn style wrappers around the bundled apps.

These hide graph construction and engine choice for callers who just want
ranks or latent factors. Everything they do is available through
``graphlite.apps`` and ``graphlite.engines`` directly.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .apps import als, coem, pagerank
from .engines import run_chromatic, run_locking


def _run(engine, g, prog, model, machines, workers, seed, coloring=None, **kw):
    if engine == "chromatic":
        return run_chromatic(g, prog, model=model, coloring=coloring, machines=machines,
                             workers=workers, seed=seed, **kw)
    return run_locking(g, prog, model=model, machines=machines, workers=workers, seed=seed, **kw)


class PageRank(BaseEstimator):
    """Fit on a directed link list; ``ranks_`` holds one score per vertex."""

    def __init__(self, alpha=pagerank.ALPHA, epsilon=pagerank.EPSILON, engine="chromatic",
                 machines=1, workers=1, seed=0):
        self.alpha = alpha
        self.epsilon = epsilon
        self.engine = engine
        self.machines = machines
        self.workers = workers
        self.seed = seed

    def fit(self, links, n_vertices=None):
        links = [tuple(x) for x in links]
        n = n_vertices if n_vertices is not None else 1 + max(max(s, d) for s, d, *_ in links)
        g = pagerank.pagerank_graph(n, links, normalize=all(len(x) == 2 for x in links))
        prog = pagerank.pagerank_program(g, self.alpha, self.epsilon)
        res = _run(self.engine, g, prog, "edge", self.machines, self.workers, self.seed)
        self.ranks_ = np.array(res.vertex_data, dtype=float)
        self.n_updates_ = res.updates
        return self

    def transform(self, vertices=None):
        check_is_fitted(self, "ranks_")
        return self.ranks_ if vertices is None else self.ranks_[np.asarray(vertices)]


class ALSFactorizer(BaseEstimator):
    """Low-rank factorization of a sparse (user, item, rating) list."""

    def __init__(self, d=3, lam=als.LAMBDA, epsilon=1e-9, max_sweeps=100, machines=1,
                 workers=1, seed=0):
        self.d = d
        self.lam = lam
        self.epsilon = epsilon
        self.max_sweeps = max_sweeps
        self.machines = machines
        self.workers = workers
        self.seed = seed

    def fit(self, X, y=None):
        """``X``: rows of (user, item) with ratings in ``y``, or (user, item, rating) rows."""
        X = np.asarray(X)
        if y is None:
            users, items, r = X[:, 0].astype(int), X[:, 1].astype(int), X[:, 2].astype(float)
        else:
            users, items, r = X[:, 0].astype(int), X[:, 1].astype(int), np.asarray(y, float)
        self.n_users_ = int(users.max()) + 1
        self.n_items_ = int(items.max()) + 1
        ratings = [(int(u), self.n_users_ + int(i), float(v)) for u, i, v in zip(users, items, r)]
        g = als.als_graph(self.n_users_, self.n_items_, ratings, self.d, seed=self.seed)
        prog = als.als_program(g, self.d, self.lam, self.epsilon)
        res = run_chromatic(g, prog, model="edge", coloring=als.bipartite_coloring(g),
                            machines=self.machines, workers=self.workers, seed=self.seed,
                            max_sweeps=self.max_sweeps)
        lat = np.array([x.latent for x in res.vertex_data])
        self.user_factors_ = lat[:self.n_users_]
        self.item_factors_ = lat[self.n_users_:]
        self.train_rmse_ = als.train_rmse(res.vertex_data, g.edges, res.edge_data)
        self.sweeps_ = res.sweeps
        return self

    def predict(self, X):
        check_is_fitted(self, "user_factors_")
        X = np.asarray(X, dtype=int)
        return np.einsum("ij,ij->i", self.user_factors_[X[:, 0]], self.item_factors_[X[:, 1]])


class CoEMLabeler(BaseEstimator):
    """Propagate seed labels over a phrase/context co-occurrence bipartite graph."""

    def __init__(self, n_types=2, epsilon=coem.EPSILON, engine="chromatic", machines=1,
                 workers=1, seed=0):
        self.n_types = n_types
        self.epsilon = epsilon
        self.engine = engine
        self.machines = machines
        self.workers = workers
        self.seed = seed

    def fit(self, counts, seeds, n_phrases, n_contexts):
        """``counts``: (phrase, context, count) with context ids starting at 0."""
        rows = [(int(p), n_phrases + int(c), int(k)) for p, c, k in counts]
        g = coem.coem_graph(n_phrases, n_contexts, rows, self.n_types, dict(seeds))
        prog = coem.coem_program(g, self.epsilon)
        res = _run(self.engine, g, prog, "edge", self.machines, self.workers, self.seed)
        dist = np.array([x.dist for x in res.vertex_data])
        self.phrase_dist_ = dist[:n_phrases]
        self.context_dist_ = dist[n_phrases:]
        return self

    def predict(self, phrases=None):
        check_is_fitted(self, "phrase_dist_")
        d = self.phrase_dist_ if phrases is None else self.phrase_dist_[np.asarray(phrases)]
        return d.argmax(axis=1)
