"""Contended counter: every leaf of a star increments the hub's value."""
from __future__ import annotations

import time

from ..engines.program import Program
from ..graph import build_graph

INCREMENT = 0


def counter_graph(leaves):
    return build_graph(leaves + 1, [(0, v) for v in range(1, leaves + 1)],
                       lambda v: 0, lambda s, t: 0)


def make_update(hub=0, delay=0.0005):
    """Read the hub, pause, write hub + 1. Correct only under the full model."""

    def increment(v, scope, globals_):
        value = scope.vertex_data(hub)
        if delay:
            time.sleep(delay)
        scope.set_vertex(hub, value + 1)
        return []

    return increment


def counter_program(g, delay=0.0005):
    return Program({INCREMENT: make_update(0, delay)},
                   [(INCREMENT, v) for v in range(1, g.num_vertices)], name="counter")
