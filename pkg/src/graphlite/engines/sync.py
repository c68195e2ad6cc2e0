"""Fold/merge/finalize evaluation of sync definitions."""
from __future__ import annotations


def fold_partial(sd, store, vertices=None):
    """Fold over the store's owned vertices in ascending id order."""
    if vertices is None:
        vertices = store.owned if hasattr(store, "owned") else range(store.num_vertices)
    acc = sd.initial()
    for v in sorted(vertices):
        acc = sd.fold(acc, v, store.vertex_data[v])
    return acc


def merge_partials(sd, partials):
    """Merge per-machine partials in ascending machine order."""
    acc = partials[0]
    for p in partials[1:]:
        acc = sd.merge(acc, p)
    return acc


def run_sync(sd, stores):
    """Evaluate ``sd`` across machine-local stores (or a single graph)."""
    if not isinstance(stores, (list, tuple)):
        stores = [stores]
    partials = [fold_partial(sd, s) for s in sorted(stores, key=lambda s: getattr(s, "me", 0))]
    return sd.finalize(merge_partials(sd, partials))
