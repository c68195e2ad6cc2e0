"""Vertex colorings that let the chromatic engine honor each consistency model."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph import ConsistencyModel, as_model


@dataclass(frozen=True)
class Coloring:
    colors: tuple
    num_colors: int

    @classmethod
    def from_list(cls, colors):
        colors = tuple(int(c) for c in colors)
        return cls(colors, (max(colors) + 1) if colors else 0)

    def __len__(self):
        return len(self.colors)

    def __getitem__(self, v):
        return self.colors[v]


def bfs_order(g):
    """Vertices in BFS order, roots taken as the lowest unvisited id."""
    n = g.num_vertices
    seen = bytearray(n)
    order = []
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = 1
        q = deque([root])
        while q:
            v = q.popleft()
            order.append(v)
            for u in g.neighbors(v):
                if not seen[u]:
                    seen[u] = 1
                    q.append(u)
    return order


def _smallest_absent(used):
    c = 0
    while c in used:
        c += 1
    return c


def greedy_color(g) -> Coloring:
    """First-order greedy coloring in BFS order."""
    colors = [-1] * g.num_vertices
    for v in bfs_order(g):
        used = {colors[u] for u in g.neighbors(v)}
        colors[v] = _smallest_absent(used)
    return Coloring.from_list(colors)


def square_color(g) -> Coloring:
    """Greedy coloring of the square graph (distance <= 2 pairs differ)."""
    colors = [-1] * g.num_vertices
    for v in bfs_order(g):
        used = set()
        for u in g.neighbors(v):
            used.add(colors[u])
            for w in g.neighbors(u):
                used.add(colors[w])
        colors[v] = _smallest_absent(used)
    return Coloring.from_list(colors)


def constant_color(g) -> Coloring:
    """Every vertex color 0; enough for the vertex consistency model."""
    return Coloring.from_list([0] * g.num_vertices)


def validate_coloring(g, c, order="first") -> bool:
    colors = c.colors if isinstance(c, Coloring) else c
    if len(colors) != g.num_vertices:
        return False
    colors = np.asarray(colors)
    if order in ("zero", "none", "constant"):
        return True
    for v in range(g.num_vertices):
        nbrs = g.neighbors(v)
        if not nbrs:
            continue
        nc = colors[list(nbrs)]
        if np.any(nc == colors[v]):
            return False
        if order == "second" and len(np.unique(nc)) != len(nc):
            return False
    return True


def required_order(model) -> str:
    model = as_model(model)
    if model is ConsistencyModel.FULL:
        return "second"
    if model is ConsistencyModel.EDGE:
        return "first"
    return "zero"


def color_for_model(g, model) -> Coloring:
    order = required_order(model)
    if order == "second":
        return square_color(g)
    if order == "first":
        return greedy_color(g)
    return constant_color(g)


def read_coloring(path) -> Coloring:
    with open(path) as fh:
        return Coloring.from_list(int(line) for line in fh if line.strip())


def write_coloring(path, c: Coloring):
    with open(path, "w") as fh:
        for col in c.colors:
            fh.write(f"{col}\n")
