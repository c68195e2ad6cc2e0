"""Data graph storage and scoped access for update functions."""
from __future__ import annotations

import enum
import threading
from typing import Callable, Iterable, Sequence

from .codec import DEFAULT_CODEC, Codec, freeze
from .errors import (
    AccessViolation,
    DoubleCommit,
    DuplicateEdge,
    EndpointOutOfRange,
    SelfLoop,
)


class ConsistencyModel(str, enum.Enum):
    VERTEX = "vertex"
    EDGE = "edge"
    FULL = "full"
    # Consistency disabled; scopes get full access and no locks are taken.
    NONE = "none"

    def __str__(self):
        return self.value


def as_model(model) -> ConsistencyModel:
    return model if isinstance(model, ConsistencyModel) else ConsistencyModel(model)


# Datum identities: ("v", vertex_id) or ("e", slot). An undirected edge with
# id e owns slots 2e (lo -> hi) and 2e + 1 (hi -> lo).
def vdatum(v: int):
    return ("v", v)


def edatum(slot: int):
    return ("e", slot)


def slot_of(edge_id: int, src: int, dst: int) -> int:
    return 2 * edge_id + (1 if src > dst else 0)


class GraphStore:
    """Common surface of the full graph and a machine-local partition.

    Subclasses provide ``vertex_data``/``vertex_version`` indexable by vertex
    id and ``edge_data``/``edge_version`` indexable by edge slot.
    """

    num_vertices: int
    codec: Codec

    def __init__(self):
        self.lock = threading.Lock()

    def neighbors(self, v: int) -> Sequence[int]:
        raise NotImplementedError

    def edge_id(self, u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        try:
            return self._edge_ids[key]
        except KeyError:
            raise KeyError(f"no edge between {u} and {v}") from None

    def slot(self, src: int, dst: int) -> int:
        return slot_of(self.edge_id(src, dst), src, dst)

    def get(self, datum):
        kind, i = datum
        return self.vertex_data[i] if kind == "v" else self.edge_data[i]

    def version(self, datum) -> int:
        kind, i = datum
        return self.vertex_version[i] if kind == "v" else self.edge_version[i]

    def put(self, datum, value, version: int):
        kind, i = datum
        if kind == "v":
            self.vertex_data[i] = value
            self.vertex_version[i] = version
        else:
            self.edge_data[i] = value
            self.edge_version[i] = version

    def encoded(self, datum) -> bytes:
        return self.codec.encode(self.get(datum))


class DataGraph(GraphStore):
    """Static undirected structure with mutable per-vertex and per-direction edge data."""

    def __init__(self, vertex_count, edges, vertex_data, edge_data, codec=None):
        super().__init__()
        self.num_vertices = vertex_count
        self.codec = codec or DEFAULT_CODEC
        self.edges = tuple(edges)
        self._edge_ids = {e: i for i, e in enumerate(self.edges)}
        adj = [[] for _ in range(vertex_count)]
        for lo, hi in self.edges:
            adj[lo].append(hi)
            adj[hi].append(lo)
        self.adjacency = tuple(tuple(sorted(a)) for a in adj)
        self.vertex_data = list(vertex_data)
        self.edge_data = list(edge_data)
        self.vertex_version = [0] * vertex_count
        self.edge_version = [0] * (2 * len(self.edges))

    @property
    def num_edges(self):
        return len(self.edges)

    def neighbors(self, v):
        if not 0 <= v < self.num_vertices:
            raise EndpointOutOfRange((v,))
        return self.adjacency[v]

    def degrees(self):
        return [len(a) for a in self.adjacency]

    def owns(self, v):
        return 0 <= v < self.num_vertices

    def vertices(self):
        return range(self.num_vertices)

    def datums(self):
        for v in range(self.num_vertices):
            yield vdatum(v)
        for s in range(2 * len(self.edges)):
            yield edatum(s)

    def copy(self):
        g = DataGraph.__new__(DataGraph)
        GraphStore.__init__(g)
        g.num_vertices = self.num_vertices
        g.codec = self.codec
        g.edges = self.edges
        g._edge_ids = self._edge_ids
        g.adjacency = self.adjacency
        g.vertex_data = list(self.vertex_data)
        g.edge_data = list(self.edge_data)
        g.vertex_version = list(self.vertex_version)
        g.edge_version = list(self.edge_version)
        return g

    def __repr__(self):
        return f"DataGraph(|V|={self.num_vertices}, |E|={len(self.edges)})"


def _zero(*_):
    return 0.0


def build_graph(
    vertex_count: int,
    edges: Iterable[tuple[int, int]],
    vertex_init: Callable[[int], object] = _zero,
    edge_init: Callable[[int, int], object] = _zero,
    codec: Codec | None = None,
) -> DataGraph:
    """Build a graph; ``edge_init(src, dst)`` fills the src -> dst slot."""
    seen = set()
    for e in edges:
        u, v = e
        if not (0 <= u < vertex_count and 0 <= v < vertex_count):
            raise EndpointOutOfRange(e)
        if u == v:
            raise SelfLoop(e)
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise DuplicateEdge(e)
        seen.add(key)
    ordered = sorted(seen)
    vdata = [freeze(vertex_init(v)) for v in range(vertex_count)]
    edata = []
    for lo, hi in ordered:
        edata.append(freeze(edge_init(lo, hi)))
        edata.append(freeze(edge_init(hi, lo)))
    return DataGraph(vertex_count, ordered, vdata, edata, codec)


def neighbors(g: GraphStore, v: int):
    return g.neighbors(v)


def read_edge_tsv(path):
    """Parse ``src<TAB>dst[<TAB>weight]`` lines; '#' starts a comment.

    Returns (vertex_count, [(src, dst, weight_or_None), ...]).
    """
    rows = []
    top = -1
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected 2 or 3 fields")
            src, dst = int(parts[0]), int(parts[1])
            if src < 0 or dst < 0:
                raise EndpointOutOfRange((src, dst))
            w = float(parts[2]) if len(parts) == 3 else None
            rows.append((src, dst, w))
            top = max(top, src, dst)
    return top + 1, rows


def write_edge_tsv(path, rows, header=None):
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        for row in rows:
            if len(row) == 3 and row[2] is not None:
                fh.write(f"{row[0]}\t{row[1]}\t{row[2]!r}\n")
            else:
                fh.write(f"{row[0]}\t{row[1]}\n")


class Scope:
    """View of a vertex, its neighbors and incident edges.

    Writes are staged and become visible in the graph only through
    :func:`commit_scope`. Reads see the scope's own staged writes.
    """

    def __init__(self, store: GraphStore, center: int, model):
        self.store = store
        self.vertex = center
        self.model = as_model(model)
        self.neighbors = tuple(store.neighbors(center))
        self._nbr_set = frozenset(self.neighbors)
        self._staged = {}
        self.committed = False

    # -- access mask -----------------------------------------------------
    def _edge_datum(self, src, dst):
        if src == self.vertex:
            if dst not in self._nbr_set:
                raise AccessViolation(("edge", src, dst), self.model, "read")
        elif dst == self.vertex:
            if src not in self._nbr_set:
                raise AccessViolation(("edge", src, dst), self.model, "read")
        else:
            raise AccessViolation(("edge", src, dst), self.model, "read")
        return edatum(self.store.slot(src, dst))

    def _vertex_datum(self, u):
        if u != self.vertex and u not in self._nbr_set:
            raise AccessViolation(vdatum(u), self.model, "read")
        return vdatum(u)

    def writable(self, datum) -> bool:
        m = self.model
        if m in (ConsistencyModel.FULL, ConsistencyModel.NONE):
            return True
        if datum == vdatum(self.vertex):
            return True
        return m is ConsistencyModel.EDGE and datum[0] == "e"

    def datums(self):
        """Every datum reachable through this scope."""
        out = [vdatum(self.vertex)]
        for u in self.neighbors:
            out.append(vdatum(u))
            out.append(edatum(self.store.slot(self.vertex, u)))
            out.append(edatum(self.store.slot(u, self.vertex)))
        return out

    # -- reads -----------------------------------------------------------
    def _read(self, datum):
        if datum in self._staged:
            return self._staged[datum]
        return self.store.get(datum)

    @property
    def data(self):
        return self._read(vdatum(self.vertex))

    @data.setter
    def data(self, value):
        self.set_vertex(self.vertex, value)

    def vertex_data(self, u):
        return self._read(self._vertex_datum(u))

    __getitem__ = vertex_data

    def edge_data(self, src, dst):
        return self._read(self._edge_datum(src, dst))

    def in_edge(self, u):
        return self.edge_data(u, self.vertex)

    def out_edge(self, u):
        return self.edge_data(self.vertex, u)

    # -- writes ----------------------------------------------------------
    def _write(self, datum, value):
        if self.committed:
            raise DoubleCommit("scope already committed")
        if not self.writable(datum):
            raise AccessViolation(datum, self.model)
        self._staged[datum] = freeze(value)

    def set_vertex(self, u, value):
        self._write(self._vertex_datum(u), value)

    __setitem__ = set_vertex

    def set_edge(self, src, dst, value):
        self._write(self._edge_datum(src, dst), value)

    def set_out_edge(self, u, value):
        self.set_edge(self.vertex, u, value)

    @property
    def staged(self):
        return dict(self._staged)


def open_scope(g: GraphStore, v: int, model=ConsistencyModel.EDGE) -> Scope:
    return Scope(g, v, model)


def commit_scope(g: GraphStore, s: Scope):
    """Apply staged writes; returns the datums whose content changed.

    A staged value byte-equal to the stored one is not a modification and
    does not bump the version.
    """
    if s.committed:
        raise DoubleCommit(f"scope of vertex {s.vertex} committed twice")
    s.committed = True
    modified = []
    codec = g.codec
    with g.lock:
        for datum, value in s._staged.items():
            old = g.get(datum)
            if old is value or codec.encode(old) == codec.encode(value):
                continue
            g.put(datum, value, g.version(datum) + 1)
            modified.append(datum)
    return modified
