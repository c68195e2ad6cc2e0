"""Two-phase partitioning: atoms, meta-graph, placement and local graphs with ghosts."""
from __future__ import annotations

import json
import os
import struct
from collections import deque
from dataclasses import dataclass, field

from .codec import DEFAULT_CODEC
from .errors import InconsistentAtoms, KOutOfRange, MachinesOutOfRange, MissingAtom
from .graph import DataGraph, GraphStore, edatum, slot_of, vdatum

MAGIC = b"GLAB1"

# Instrumentation: number of times a graph was (re)partitioned into atoms.
stats = {"overpartition": 0}


@dataclass
class Atom:
    atom_id: int
    num_vertices: int
    # (vertex id, color, payload bytes)
    vertices: list = field(default_factory=list)
    # (edge id, lo, hi, lo->hi payload bytes, hi->lo payload bytes)
    interior: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    ghosts: list = field(default_factory=list)

    @property
    def owned(self):
        return [v for v, _, _ in self.vertices]

    def nbytes(self):
        """Stored payload bytes; a boundary edge is charged to its lower endpoint's atom."""
        owned = set(self.owned)
        total = sum(len(p) for _, _, p in self.vertices)
        total += sum(len(a) + len(b) for _, _, _, a, b in self.interior)
        total += sum(len(a) + len(b) for _, lo, _, a, b in self.boundary if lo in owned)
        return total


@dataclass
class MetaGraph:
    vertex_weight: list
    edge_weight: dict  # (a, b) with a < b -> crossing edge count

    @property
    def k(self):
        return len(self.vertex_weight)

    def to_json(self):
        return {
            "k": self.k,
            "vertex_weight": list(self.vertex_weight),
            "edges": [[a, b, w] for (a, b), w in sorted(self.edge_weight.items())],
        }

    @classmethod
    def from_json(cls, obj):
        return cls(list(obj["vertex_weight"]), {(a, b): w for a, b, w in obj["edges"]})


@dataclass
class Placement:
    machine_of: list  # atom id -> machine id
    num_machines: int

    def atoms_on(self, machine):
        return [a for a, m in enumerate(self.machine_of) if m == machine]

    def loads(self, weights):
        out = [0] * self.num_machines
        for a, m in enumerate(self.machine_of):
            out[m] += weights[a]
        return out

    def to_json(self):
        return {"num_machines": self.num_machines, "machine_of": list(self.machine_of)}

    @classmethod
    def from_json(cls, obj):
        return cls(list(obj["machine_of"]), obj["num_machines"])


# -- phase one: over-partition -------------------------------------------------

def _capacities(n, k):
    return [n // k + (1 if i < n % k else 0) for i in range(k)]


def range_assignment(g, k):
    caps = _capacities(g.num_vertices, k)
    out = []
    for a, c in enumerate(caps):
        out.extend([a] * c)
    return out


def bfs_assignment(g, k):
    """Balanced BFS region growing from evenly spaced seed vertices."""
    n = g.num_vertices
    caps = _capacities(n, k)
    assign = [-1] * n
    sizes = [0] * k
    frontiers = []
    for a in range(k):
        seed = a * n // k
        assign[seed] = a
        sizes[a] = 1
        frontiers.append(deque(g.neighbors(seed)))
    remaining = n - k
    low = 0
    while remaining:
        for a in range(k):
            if sizes[a] >= caps[a] or not remaining:
                continue
            fr = frontiers[a]
            v = None
            while fr:
                u = fr.popleft()
                if assign[u] < 0:
                    v = u
                    break
            if v is None:
                while assign[low] >= 0:
                    low += 1
                v = low
            assign[v] = a
            sizes[a] += 1
            remaining -= 1
            fr.extend(u for u in g.neighbors(v) if assign[u] < 0)
    return assign


def read_assignment(path, n=None):
    pairs = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                v, a = line.split()[:2]
                pairs[int(v)] = int(a)
    n = n if n is not None else max(pairs) + 1
    missing = [v for v in range(n) if v not in pairs]
    if missing:
        raise InconsistentAtoms(f"assignment file misses vertices {missing[:5]}")
    return [pairs[v] for v in range(n)]


def atoms_from_assignment(g: DataGraph, assign, coloring=None):
    k = max(assign) + 1 if assign else 0
    if coloring is None:
        colors = [0] * g.num_vertices
    else:
        colors = getattr(coloring, "colors", coloring)
    codec = g.codec
    atoms = [Atom(a, g.num_vertices) for a in range(k)]
    for v in range(g.num_vertices):
        atoms[assign[v]].vertices.append((v, int(colors[v]), codec.encode(g.vertex_data[v])))
    ghosts = [set() for _ in range(k)]
    for e, (lo, hi) in enumerate(g.edges):
        rec = (e, lo, hi, codec.encode(g.edge_data[2 * e]), codec.encode(g.edge_data[2 * e + 1]))
        a, b = assign[lo], assign[hi]
        if a == b:
            atoms[a].interior.append(rec)
        else:
            atoms[a].boundary.append(rec)
            atoms[b].boundary.append(rec)
            ghosts[a].add(hi)
            ghosts[b].add(lo)
    for a in range(k):
        atoms[a].ghosts = sorted(ghosts[a])
    return atoms


def meta_graph(atoms):
    owner = {}
    for atom in atoms:
        for v in atom.owned:
            owner[v] = atom.atom_id
    weights = [atom.nbytes() for atom in atoms]
    cross = {}
    seen = set()
    for atom in atoms:
        for e, lo, hi, _, _ in atom.boundary:
            if e in seen:
                continue
            seen.add(e)
            a, b = sorted((owner[lo], owner[hi]))
            cross[(a, b)] = cross.get((a, b), 0) + 1
    return MetaGraph(weights, cross)


def overpartition(g: DataGraph, k: int, method="bfs", assignment=None, coloring=None):
    """Split ``g`` into ``k`` atoms; returns (atoms, meta-graph)."""
    if assignment is None and not 1 <= k <= g.num_vertices:
        raise KOutOfRange(f"k={k} outside [1, {g.num_vertices}]")
    stats["overpartition"] += 1
    if assignment is not None:
        assign = list(assignment)
    elif method == "bfs":
        assign = bfs_assignment(g, k)
    elif method == "range":
        assign = range_assignment(g, k)
    else:
        raise ValueError(f"unknown partition method {method!r}")
    atoms = atoms_from_assignment(g, assign, coloring)
    return atoms, meta_graph(atoms)


# -- phase two: placement -------------------------------------------------------

def place(mg: MetaGraph, m: int) -> Placement:
    """Longest-processing-time greedy: heaviest atom to the lightest machine."""
    if not 1 <= m <= mg.k:
        raise MachinesOutOfRange(f"m={m} outside [1, {mg.k}]")
    loads = [0] * m
    machine_of = [0] * mg.k
    for a in sorted(range(mg.k), key=lambda a: (-mg.vertex_weight[a], a)):
        target = min(range(m), key=lambda i: (loads[i], i))
        machine_of[a] = target
        loads[target] += mg.vertex_weight[a]
    return Placement(machine_of, m)


# -- local graphs ------------------------------------------------------------------

class LocalGraph(GraphStore):
    """One machine's owned vertices and edges plus ghost replicas."""

    def __init__(self, me, num_machines, num_vertices, codec):
        super().__init__()
        self.me = me
        self.num_machines = num_machines
        self.num_vertices = num_vertices
        self.codec = codec
        self.owned = ()
        self.ghosts = ()
        self.owner = {}
        self.adjacency = {}
        self._edge_ids = {}
        self.vertex_data = {}
        self.vertex_version = {}
        self.edge_data = {}
        self.edge_version = {}
        self.colors = {}
        self.holders = {}
        self.last_pushed = {}
        self.vertex_owner = []

    def neighbors(self, v):
        return self.adjacency[v]

    def owns(self, v):
        return self.owner.get(v) == self.me

    def held_edges(self):
        return sorted(self._edge_ids.items(), key=lambda kv: kv[1])

    def datums(self):
        for v in sorted(self.vertex_data):
            yield vdatum(v)
        for s in sorted(self.edge_data):
            yield edatum(s)

    def replicas(self, datum):
        """Machines other than this one that hold ``datum``."""
        return [m for m in self.holders.get(datum, ()) if m != self.me]

    def __repr__(self):
        return f"LocalGraph(me={self.me}, owned={len(self.owned)}, ghosts={len(self.ghosts)})"


def load_local(atoms, placement: Placement, me: int, codec=None) -> LocalGraph:
    """Merge the atoms placed on machine ``me`` and attach ghosts."""
    codec = codec or DEFAULT_CODEC
    by_id = {a.atom_id: a for a in atoms}
    for a in range(len(placement.machine_of)):
        if a not in by_id:
            raise MissingAtom(f"atom {a} not provided")
    n = atoms[0].num_vertices if atoms else 0
    vertex_atom, vertex_rec = {}, {}
    edges = {}
    nbrs = {}
    for atom in atoms:
        if atom.num_vertices != n:
            raise InconsistentAtoms("atoms disagree on the vertex count")
        for rec in atom.vertices:
            v = rec[0]
            if v in vertex_atom:
                raise InconsistentAtoms(f"vertex {v} owned by atoms {vertex_atom[v]} and {atom.atom_id}")
            vertex_atom[v] = atom.atom_id
            vertex_rec[v] = rec
        for rec in list(atom.interior) + list(atom.boundary):
            e = rec[0]
            if e in edges:
                if edges[e] != rec:
                    raise InconsistentAtoms(f"edge {e} differs between atoms")
                continue
            edges[e] = rec
            nbrs.setdefault(rec[1], []).append(rec[2])
            nbrs.setdefault(rec[2], []).append(rec[1])
    if len(vertex_atom) != n:
        raise InconsistentAtoms(f"atoms own {len(vertex_atom)} of {n} vertices")

    def owner_of(v):
        return placement.machine_of[vertex_atom[v]]

    lg = LocalGraph(me, placement.num_machines, n, codec)
    lg.vertex_owner = [owner_of(v) for v in range(n)]
    owned = sorted(v for v in vertex_atom if owner_of(v) == me)
    owned_set = set(owned)
    ghosts = set()
    for v in owned:
        for u in nbrs.get(v, ()):
            if u not in owned_set:
                ghosts.add(u)
    lg.owned = tuple(owned)
    lg.ghosts = tuple(sorted(ghosts))
    held = owned_set | ghosts
    for v in sorted(held):
        _, color, payload = vertex_rec[v]
        lg.owner[v] = owner_of(v)
        lg.colors[v] = color
        lg.vertex_data[v] = codec.decode(payload)
        lg.vertex_version[v] = 0
        holders = {owner_of(v)} | {owner_of(u) for u in nbrs.get(v, ())}
        lg.holders[vdatum(v)] = tuple(sorted(holders))
    adjacency = {v: [] for v in held}
    for e in sorted(edges):
        _, lo, hi, fwd, bwd = edges[e]
        if lo not in owned_set and hi not in owned_set:
            continue
        lg._edge_ids[(lo, hi)] = e
        adjacency[lo].append(hi)
        adjacency[hi].append(lo)
        holders = tuple(sorted({owner_of(lo), owner_of(hi)}))
        for s, payload in ((slot_of(e, lo, hi), fwd), (slot_of(e, hi, lo), bwd)):
            lg.edge_data[s] = codec.decode(payload)
            lg.edge_version[s] = 0
            lg.holders[edatum(s)] = holders
    lg.adjacency = {v: tuple(sorted(a)) for v, a in adjacency.items()}
    return lg


def distribute(g: DataGraph, machines=1, k=None, atoms=None, method="bfs", coloring=None):
    """Convenience path: over-partition (unless atoms given), place, load."""
    if atoms is None:
        k = k if k is not None else max(machines, min(g.num_vertices, 4 * machines))
        atoms, mg = overpartition(g, k, method=method, coloring=coloring)
    else:
        mg = meta_graph(atoms)
    placement = place(mg, machines)
    return [load_local(atoms, placement, i, g.codec) for i in range(machines)]


def reassemble(locals_, template: DataGraph | None = None):
    """Union of owned vertices and edges across machines, as plain dicts."""
    vertex, edge = {}, {}
    for lg in locals_:
        for v in lg.owned:
            vertex[v] = lg.vertex_data[v]
        for (lo, hi), e in lg._edge_ids.items():
            # an edge's canonical copy lives with its lower endpoint's owner
            if lg.owns(lo):
                for s in (2 * e, 2 * e + 1):
                    edge[s] = lg.edge_data[s]
    return vertex, edge


# -- atom files ------------------------------------------------------------------

_HDR = struct.Struct("<IIIIII")
_U32 = struct.Struct("<I")
_VREC = struct.Struct("<IiI")
_EREC = struct.Struct("<IIII")


def encode_atom(atom: Atom) -> bytes:
    out = [MAGIC, _HDR.pack(atom.atom_id, atom.num_vertices, len(atom.vertices),
                            len(atom.interior), len(atom.boundary), len(atom.ghosts))]
    for v, color, payload in atom.vertices:
        out.append(_VREC.pack(v, color, len(payload)))
        out.append(payload)
    for recs in (atom.interior, atom.boundary):
        for e, lo, hi, fwd, bwd in recs:
            out.append(_EREC.pack(e, lo, hi, len(fwd)))
            out.append(fwd)
            out.append(_U32.pack(len(bwd)))
            out.append(bwd)
    for g in atom.ghosts:
        out.append(_U32.pack(g))
    return b"".join(out)


def decode_atom(data: bytes) -> Atom:
    if data[:5] != MAGIC:
        raise InconsistentAtoms("bad atom magic")
    pos = 5
    atom_id, n, nv, ni, nb, ng = _HDR.unpack_from(data, pos)
    pos += _HDR.size
    atom = Atom(atom_id, n)
    for _ in range(nv):
        v, color, ln = _VREC.unpack_from(data, pos)
        pos += _VREC.size
        atom.vertices.append((v, color, data[pos:pos + ln]))
        pos += ln
    for count, recs in ((ni, atom.interior), (nb, atom.boundary)):
        for _ in range(count):
            e, lo, hi, ln = _EREC.unpack_from(data, pos)
            pos += _EREC.size
            fwd = data[pos:pos + ln]
            pos += ln
            (ln,) = _U32.unpack_from(data, pos)
            pos += 4
            bwd = data[pos:pos + ln]
            pos += ln
            recs.append((e, lo, hi, fwd, bwd))
    for _ in range(ng):
        atom.ghosts.append(_U32.unpack_from(data, pos)[0])
        pos += 4
    if pos != len(data):
        raise InconsistentAtoms("trailing bytes in atom file")
    return atom


def atom_path(directory, atom_id):
    return os.path.join(directory, f"atom_{atom_id:05d}.glab")


def save_atoms(directory, atoms, mg: MetaGraph | None = None):
    os.makedirs(directory, exist_ok=True)
    for atom in atoms:
        with open(atom_path(directory, atom.atom_id), "wb") as fh:
            fh.write(encode_atom(atom))
    mg = mg or meta_graph(atoms)
    with open(os.path.join(directory, "metagraph.json"), "w") as fh:
        json.dump(mg.to_json(), fh, indent=1, sort_keys=True)


def load_atoms(directory, atom_ids=None):
    with open(os.path.join(directory, "metagraph.json")) as fh:
        mg = MetaGraph.from_json(json.load(fh))
    ids = range(mg.k) if atom_ids is None else atom_ids
    atoms = []
    for a in ids:
        path = atom_path(directory, a)
        if not os.path.exists(path):
            raise MissingAtom(path)
        with open(path, "rb") as fh:
            atoms.append(decode_atom(fh.read()))
    return atoms, mg


def save_placement(path, placement: Placement):
    with open(path, "w") as fh:
        json.dump(placement.to_json(), fh, indent=1, sort_keys=True)


def load_placement(path) -> Placement:
    with open(path) as fh:
        return Placement.from_json(json.load(fh))
