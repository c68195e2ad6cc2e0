"""Deterministic generators for the bundled workloads: TSV edge list plus JSON sidecar."""
from __future__ import annotations

import json
import os

import numpy as np

from ..errors import BadParams
from ..graph import read_edge_tsv, write_edge_tsv
from . import als, coem, counter, lbp, pagerank

GRAPH_FILE = "graph.tsv"
SIDECAR_FILE = "graph.json"

DEFAULTS = {
    "pagerank-random": {"n": 100, "p": 0.05, "alpha": pagerank.ALPHA, "epsilon": pagerank.EPSILON},
    "als-synthetic": {"n_users": 20, "n_movies": 20, "rank": 3, "d": 3, "lambda": 0.0,
                      "density": 1.0},
    "coem-toy": {"n_phrases": 2, "n_contexts": 2, "n_types": 2, "density": 1.0, "n_seeds": 1,
                 "epsilon": coem.EPSILON},
    "grid-mrf": {"rows": 4, "cols": 4, "labels": 3, "smoothing": lbp.SMOOTHING,
                 "strength": 2.0, "epsilon": lbp.EPSILON},
    "counter": {"leaves": 20, "delay": 0.0005},
}

KINDS = tuple(DEFAULTS)


def _params(kind, params):
    if kind not in DEFAULTS:
        raise BadParams(f"unknown dataset kind {kind!r}; expected one of {', '.join(KINDS)}")
    merged = dict(DEFAULTS[kind])
    for key, value in (params or {}).items():
        if key not in merged:
            raise BadParams(f"{kind}: unknown parameter {key!r}")
        merged[key] = type(merged[key])(value) if merged[key] is not None else value
    return merged


def _check(cond, msg):
    if not cond:
        raise BadParams(msg)


def make_dataset(kind, params=None, seed=0, out_dir="."):
    """Write ``graph.tsv`` and ``graph.json`` under ``out_dir``; returns their paths."""
    p = _params(kind, params)
    rows, extra = [], {}
    if kind == "pagerank-random":
        _check(p["n"] >= 2 and 0 <= p["p"] <= 1, "pagerank-random needs n >= 2 and 0 <= p <= 1")
        links = pagerank.random_links(p["n"], p["p"], seed)
        weights = pagerank.normalize_links(links)
        rows = [(s, d, weights[(s, d)]) for s, d in links]
        n = p["n"]
    elif kind == "als-synthetic":
        _check(p["n_users"] >= 1 and p["n_movies"] >= 1 and p["rank"] >= 1 and p["d"] >= 1,
               "als-synthetic sizes must be positive")
        _check(p["lambda"] >= 0 and 0 < p["density"] <= 1, "als-synthetic: bad lambda or density")
        rows, _, _ = als.synthetic_ratings(p["n_users"], p["n_movies"], p["rank"], seed, p["density"])
        n = p["n_users"] + p["n_movies"]
    elif kind == "coem-toy":
        npz, nc, T = p["n_phrases"], p["n_contexts"], p["n_types"]
        _check(npz >= 1 and nc >= 1 and T >= 2, "coem-toy needs phrases, contexts and >= 2 types")
        _check(1 <= p["n_seeds"] <= npz, "coem-toy: n_seeds must be in [1, n_phrases]")
        rng = np.random.default_rng(seed)
        for a in range(npz):
            for c in range(nc):
                if p["density"] >= 1.0 or rng.random() < p["density"] or c == a % nc:
                    rows.append((a, npz + c, float(rng.integers(1, 5))))
        for c in range(nc):
            if not any(r[1] == npz + c for r in rows):
                rows.append((c % npz, npz + c, 1.0))
        rows.sort()
        extra["seeds"] = {str(a): int(a % T) for a in range(p["n_seeds"])}
        n = npz + nc
    elif kind == "grid-mrf":
        _check(p["rows"] >= 1 and p["cols"] >= 1 and p["labels"] >= 2, "grid-mrf: bad grid shape")
        n = p["rows"] * p["cols"]
        rows = [(a, b) for a, b in lbp.grid_edges(p["rows"], p["cols"])]
        extra["unaries"] = lbp.noisy_unaries(n, p["labels"], seed, p["strength"]).tolist()
    else:
        _check(p["leaves"] >= 1 and p["delay"] >= 0, "counter needs leaves >= 1 and delay >= 0")
        n = p["leaves"] + 1
        rows = [(0, v) for v in range(1, n)]
    os.makedirs(out_dir, exist_ok=True)
    tsv = os.path.join(out_dir, GRAPH_FILE)
    side = os.path.join(out_dir, SIDECAR_FILE)
    write_edge_tsv(tsv, rows, header=f"{kind} seed={seed}")
    meta = {"kind": kind, "seed": seed, "num_vertices": n, "params": p, **extra}
    with open(side, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return tsv, side


def load_dataset(directory):
    """Returns (sidecar metadata, vertex count, edge rows)."""
    side = os.path.join(directory, SIDECAR_FILE)
    tsv = os.path.join(directory, GRAPH_FILE)
    if not os.path.exists(tsv):
        raise FileNotFoundError(tsv)
    meta = {}
    if os.path.exists(side):
        with open(side) as fh:
            meta = json.load(fh)
    n, rows = read_edge_tsv(tsv)
    n = max(n, meta.get("num_vertices", 0))
    return meta, n, rows
