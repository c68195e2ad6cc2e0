"""Bundled applications: how each builds its graph, program and result file."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import als, coem, counter, lbp, pagerank


@dataclass
class App:
    name: str
    dataset: str
    engine: str
    model: str
    scheduler: str
    build: Callable  # (meta, n, rows, opts, seed) -> (graph, program, coloring or None)
    result_file: str
    write_result: Callable  # (path, vertex_data) -> None
    syncs: dict = field(default_factory=dict)  # key -> factory(graph, meta, tau)
    uses_priority: bool = False


def _opt(opts, meta, key, default):
    if key in opts:
        return type(default)(opts[key]) if default is not None else opts[key]
    return meta.get("params", {}).get(key, default)


def _pick_syncs(app, keys, g, meta, tau):
    out = []
    for k in keys or ():
        if k not in app.syncs:
            raise ValueError(f"app {app.name} has no sync {k!r}; available: {sorted(app.syncs)}")
        out.append(app.syncs[k](g, meta, tau))
    return out


def _write_rows(path, header, rows):
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")


# -- pagerank ---------------------------------------------------------------------

def _build_pagerank(meta, n, rows, opts, seed):
    weighted = all(w is not None for _, _, w in rows)
    links = [(s, d, w) for s, d, w in rows] if weighted else [(s, d) for s, d, _ in rows]
    g = pagerank.pagerank_graph(n, links, normalize=not weighted)
    alpha = _opt(opts, meta, "alpha", pagerank.ALPHA)
    eps = _opt(opts, meta, "epsilon", pagerank.EPSILON)
    return g, pagerank.pagerank_program(g, alpha, eps), None


def _write_ranks(path, vertex_data):
    _write_rows(path, ("vertex", "rank"), ((v, float(r)) for v, r in enumerate(vertex_data)))


# -- als ------------------------------------------------------------------------------

def _build_als(meta, n, rows, opts, seed):
    p = meta.get("params", {})
    n_users = int(opts.get("n_users", p.get("n_users", n // 2)))
    d = int(_opt(opts, meta, "d", 3))
    lam = float(_opt(opts, meta, "lambda", als.LAMBDA))
    # sweeps repeat until latents settle; pass epsilon=null to sweep until --max-sweeps
    eps = opts.get("epsilon", 1e-9)
    ratings = [(s, t, w) for s, t, w in rows]
    g = als.als_graph(n_users, n - n_users, ratings, d, seed=seed)
    prog = als.als_program(g, d, lam, None if eps is None else float(eps))
    return g, prog, als.bipartite_coloring(g)


def _write_latents(path, vertex_data):
    _write_rows(path, ("vertex", "side", "latent"),
                ((v, x.side, ",".join(repr(float(a)) for a in x.latent)) for v, x in enumerate(vertex_data)))


def _rmse(g, meta, tau):
    return als.rmse_sync(g.num_edges, tau)


# -- coem -----------------------------------------------------------------------------

def _build_coem(meta, n, rows, opts, seed):
    p = meta.get("params", {})
    n_phrases = int(p.get("n_phrases", n // 2))
    seeds = {int(k): int(v) for k, v in meta.get("seeds", {"0": 0}).items()}
    T = int(p.get("n_types", 2))
    counts = [(s, t, int(w if w is not None else 1)) for s, t, w in rows]
    g = coem.coem_graph(n_phrases, n - n_phrases, counts, T, seeds)
    eps = _opt(opts, meta, "epsilon", coem.EPSILON)
    return g, coem.coem_program(g, eps), [int(x.side) for x in g.vertex_data]


def _write_dists(path, vertex_data):
    _write_rows(path, ("vertex", "side", "seed", "dist"),
                ((v, x.side, int(x.seed), ",".join(repr(float(a)) for a in x.dist))
                 for v, x in enumerate(vertex_data)))


# -- lbp -------------------------------------------------------------------------------

def _build_lbp(meta, n, rows, opts, seed):
    unaries = meta.get("unaries")
    if unaries is None:
        L = int(meta.get("params", {}).get("labels", 2))
        unaries = lbp.noisy_unaries(n, L, seed).tolist()
    g = lbp.lbp_graph(n, [(s, t) for s, t, _ in rows], unaries)
    smooth = _opt(opts, meta, "smoothing", lbp.SMOOTHING)
    eps = _opt(opts, meta, "epsilon", lbp.EPSILON)
    return g, lbp.lbp_program(g, smooth, eps), None


def _write_beliefs(path, vertex_data):
    _write_rows(path, ("vertex", "belief"),
                ((v, ",".join(repr(float(a)) for a in x.belief)) for v, x in enumerate(vertex_data)))


# -- counter ------------------------------------------------------------------------

def _build_counter(meta, n, rows, opts, seed):
    g = counter.counter_graph(n - 1)
    delay = _opt(opts, meta, "delay", 0.0005)
    return g, counter.counter_program(g, delay), None


def _write_counter(path, vertex_data):
    _write_rows(path, ("vertex", "value"), enumerate(vertex_data))


def _sum_sync(key, get):
    from ..engines.program import SyncDefinition

    def factory(g, meta, tau):
        return SyncDefinition(key, fold=lambda acc, v, x: acc + get(x), merge=lambda a, b: a + b,
                              acc0=0.0, tau=tau)

    return factory


APPS = {
    "pagerank": App("pagerank", "pagerank-random", "chromatic", "edge", "priority",
                    _build_pagerank, "ranks.tsv", _write_ranks,
                    {"rank_sum": lambda g, meta, tau: pagerank.rank_sum_sync(tau)},
                    uses_priority=True),
    "als": App("als", "als-synthetic", "chromatic", "edge", "sweep", _build_als,
               "latents.tsv", _write_latents, {"rmse": _rmse}),
    "coem": App("coem", "coem-toy", "chromatic", "edge", "fifo", _build_coem,
                "labels.tsv", _write_dists,
                {"mass": _sum_sync("mass", lambda x: float(np.sum(x.dist)))}),
    "lbp": App("lbp", "grid-mrf", "locking", "edge", "priority", _build_lbp,
               "beliefs.tsv", _write_beliefs,
               {"belief_mass": _sum_sync("belief_mass", lambda x: float(np.sum(x.belief)))},
               uses_priority=True),
    "counter": App("counter", "counter", "locking", "full", "fifo", _build_counter,
                   "counter.tsv", _write_counter,
                   {"total": _sum_sync("total", lambda x: float(x))}),
}


def get_app(name) -> App:
    try:
        return APPS[name]
    except KeyError:
        raise ValueError(f"unknown app {name!r}; expected one of {', '.join(APPS)}") from None


def build_app(name, meta, n, rows, opts=None, seed=0, sync_keys=(), tau=1000):
    """Returns (app, graph, program, coloring or None)."""
    app = get_app(name)
    g, prog, coloring = app.build(meta, n, rows, dict(opts or {}), seed)
    prog.syncs = _pick_syncs(app, sync_keys, g, meta, tau)
    return app, g, prog, coloring
