"""Metric-graph model: vertices, edges, topology classification, motifs.

A graph lives in the plane; every edge carries a length, the angle it makes
with the graph x-axis, and the position of its s=0 endpoint relative to the
graph origin (the first listed vertex).  Degree-2 internal vertices are
treated as trivial flux pass-throughs: maximal chains through them fold into
effective elements (pendant chains, center-to-center connectors, self-loops)
from which motifs and secular systems are assembled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

ZERO_LENGTH_TOL = 1e-12


class GraphError(ValueError):
    """Raised for invalid graph constructions."""


@dataclass(frozen=True)
class Vertex:
    id: int
    position: tuple[float, float]
    kind: str  # "internal" | "terminal"


@dataclass(frozen=True)
class Edge:
    id: int
    endpoints: tuple[int, int]
    length: float
    angle: float  # radians vs the graph x-axis, direction endpoints[0] -> [1]
    origin_offset: tuple[float, float]  # position of the s=0 point


@dataclass(frozen=True)
class DeltaSpec:
    """A point potential (strength/L_total)*delta sitting on a vertex."""
    vertex: int
    strength: float


@dataclass(frozen=True)
class GraphSpec:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    topology_class: str
    closed: bool
    delta: Optional[DeltaSpec] = None

    @property
    def total_length(self) -> float:
        return sum(e.length for e in self.edges)

    def degree(self, vid: int) -> int:
        return sum(1 for e in self.edges for v in e.endpoints if v == vid)

    def neighbors(self, vid: int):
        out = []
        for e in self.edges:
            u, v = e.endpoints
            if u == vid:
                out.append((v, e.id))
            elif v == vid:
                out.append((u, e.id))
        return out

    def position(self, vid: int) -> tuple[float, float]:
        return self.vertices[vid].position

    def boundary_condition_count(self) -> tuple[int, int, int]:
        """(terminal amplitude, internal flux, internal matching) condition counts."""
        v_e = sum(1 for v in self.vertices if v.kind == "terminal")
        v_i = len(self.vertices) - v_e
        matching = 2 * len(self.edges) - v_e - v_i
        return v_e, v_i, matching

    def to_dict(self) -> dict:
        d = {
            "format": "qgnlo-graph",
            "version": 1,
            "vertices": [
                {"id": v.id, "x": v.position[0], "y": v.position[1]}
                for v in self.vertices
            ],
            "edges": [[e.endpoints[0], e.endpoints[1]] for e in self.edges],
            "topology_class": self.topology_class,
        }
        if self.delta is not None:
            d["delta"] = {"vertex": self.delta.vertex,
                          "strength": self.delta.strength}
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @staticmethod
    def from_dict(d: dict) -> "GraphSpec":
        try:
            verts = sorted(d["vertices"], key=lambda v: v["id"])
            positions = [(float(v["x"]), float(v["y"])) for v in verts]
            if [v["id"] for v in verts] != list(range(len(verts))):
                raise GraphError("vertex ids must be 0..V-1")
            adjacency = [tuple(int(x) for x in e) for e in d["edges"]]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph document: missing {exc}") from exc
        delta = None
        if "delta" in d and d["delta"] is not None:
            delta = DeltaSpec(int(d["delta"]["vertex"]),
                              float(d["delta"]["strength"]))
        return build_graph(positions, adjacency,
                           topology_class=d.get("topology_class"),
                           delta=delta)

    @staticmethod
    def from_json(text: str) -> "GraphSpec":
        return GraphSpec.from_dict(json.loads(text))


def build_graph(vertex_positions: Sequence[tuple[float, float]],
                adjacency: Sequence[tuple[int, int]],
                topology_class: Optional[str] = None,
                delta: Optional[DeltaSpec] = None) -> GraphSpec:
    """Build a GraphSpec from vertex positions and an edge list.

    Lengths, angles and origin offsets are computed from the positions; the
    topology class is inferred from the adjacency structure unless given.
    Duplicate edges and disconnected graphs are rejected.
    """
    n = len(vertex_positions)
    if not adjacency:
        raise GraphError("a graph needs at least one edge")
    seen = set()
    for u, v in adjacency:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u},{v}) references a missing vertex")
        if u == v:
            raise GraphError(f"self-loop on vertex {u} without intermediate "
                             "vertices is not supported")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"duplicate edge ({u},{v})")
        seen.add(key)

    origin = vertex_positions[0]
    edges = []
    for eid, (u, v) in enumerate(adjacency):
        xu, yu = vertex_positions[u]
        xv, yv = vertex_positions[v]
        length = math.hypot(xv - xu, yv - yu)
        if length <= ZERO_LENGTH_TOL:
            raise GraphError(f"zero-length edge ({u},{v})")
        angle = math.atan2(yv - yu, xv - xu)
        edges.append(Edge(eid, (u, v), length, angle,
                          (xu - origin[0], yu - origin[1])))

    deg = [0] * n
    for u, v in adjacency:
        deg[u] += 1
        deg[v] += 1
    if any(d == 0 for d in deg):
        raise GraphError("isolated vertex")

    # connectivity
    seen_v = {0}
    stack = [0]
    nbrs = [[] for _ in range(n)]
    for u, v in adjacency:
        nbrs[u].append(v)
        nbrs[v].append(u)
    while stack:
        u = stack.pop()
        for w in nbrs[u]:
            if w not in seen_v:
                seen_v.add(w)
                stack.append(w)
    if len(seen_v) != n:
        raise GraphError("graph is not connected")

    vertices = tuple(
        Vertex(i, (float(vertex_positions[i][0]) - 0.0,
                   float(vertex_positions[i][1]) - 0.0),
               "terminal" if deg[i] == 1 else "internal")
        for i in range(n))
    closed = all(v.kind == "internal" for v in vertices)

    if delta is not None:
        if not (0 <= delta.vertex < n):
            raise GraphError("delta potential on a missing vertex")
        if vertices[delta.vertex].kind == "terminal":
            raise GraphError("delta potential on a terminal vertex")
        if closed or any(d > 2 for d in deg):
            raise GraphError("delta potentials are only supported on open "
                             "wires")

    g = GraphSpec(vertices, tuple(edges), "custom", closed, delta)
    inferred = infer_topology_class(g)
    cls = topology_class if topology_class is not None else inferred
    return GraphSpec(vertices, tuple(edges), cls, closed, delta)


# ---------------------------------------------------------------------------
# effective structure: fold degree-2 chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainLink:
    """One physical edge inside a folded chain.

    offset is the chain coordinate of the edge's own s=0 endpoint; forward
    means the chain traverses the edge from endpoints[0] to endpoints[1].
    """
    edge_id: int
    forward: bool
    offset: float


@dataclass(frozen=True)
class Chain:
    kind: str  # "pendant" | "connector" | "loop" | "path" | "cycle"
    v_start: int
    v_end: int
    length: float
    links: tuple[ChainLink, ...]


@dataclass(frozen=True)
class EffectiveStructure:
    centers: tuple[int, ...]          # vertex ids with amplitude unknowns
    pendants: tuple[Chain, ...]
    connectors: tuple[Chain, ...]
    loops: tuple[Chain, ...]
    special: Optional[Chain] = None   # whole-graph path or cycle

    @property
    def kind(self) -> str:
        if self.special is not None:
            return self.special.kind
        return "composite"


def _walk(g: GraphSpec, start: int, first_edge: Edge, is_center) -> Chain:
    """Follow a chain from a center through degree-2 vertices."""
    links = []
    pos = 0.0
    v = start
    e = first_edge
    while True:
        forward = e.endpoints[0] == v
        links.append(ChainLink(e.id, forward, pos))
        pos += e.length
        v = e.endpoints[1] if forward else e.endpoints[0]
        if is_center(v) or g.vertices[v].kind == "terminal":
            break
        nxt = [eid for _, eid in g.neighbors(v) if eid != e.id]
        e = g.edges[nxt[0]]
    if g.vertices[v].kind == "terminal":
        kind = "pendant"
    elif v == start:
        kind = "loop"
    else:
        kind = "connector"
    return Chain(kind, start, v, pos, tuple(links))


def effective_structure(g: GraphSpec) -> EffectiveStructure:
    deg = {v.id: g.degree(v.id) for v in g.vertices}
    centers = [v.id for v in g.vertices
               if v.kind == "internal" and deg[v.id] >= 3]
    if g.delta is not None and g.delta.vertex not in centers:
        centers.append(g.delta.vertex)
        centers.sort()

    if not centers:
        if g.closed:
            start = 0
            nbr = min(w for w, _ in g.neighbors(start))
            eid = next(eid for w, eid in g.neighbors(start) if w == nbr)
            chain = _walk_free(g, start, g.edges[eid], "cycle")
            return EffectiveStructure((), (), (), (), chain)
        ends = [v.id for v in g.vertices if v.kind == "terminal"]
        start = min(ends)
        eid = g.neighbors(start)[0][1]
        chain = _walk_free(g, start, g.edges[eid], "path")
        return EffectiveStructure((), (), (), (), chain)

    center_set = set(centers)
    pendants, connectors, loops = [], [], []
    seen_first_edges = set()
    for c in centers:
        for _, eid in g.neighbors(c):
            chain = _walk(g, c, g.edges[eid], center_set.__contains__)
            first = chain.links[0].edge_id
            last = chain.links[-1].edge_id
            if chain.kind == "pendant":
                pendants.append(chain)
            elif chain.kind == "connector":
                # found once from each end; keep the traversal from the
                # lower-id center (tie broken by first edge id)
                key = (min(chain.v_start, chain.v_end),
                       max(chain.v_start, chain.v_end),
                       min(first, last))
                if key in seen_first_edges:
                    continue
                seen_first_edges.add(key)
                connectors.append(chain)
            else:
                # self-loop: found once per traversal direction
                key = (c, min(first, last), "loop")
                if key in seen_first_edges:
                    continue
                seen_first_edges.add(key)
                loops.append(chain)
    return EffectiveStructure(tuple(centers), tuple(pendants),
                              tuple(connectors), tuple(loops))


def _walk_free(g: GraphSpec, start: int, first_edge: Edge, kind: str) -> Chain:
    """Traverse an entire path or cycle graph starting at `start`."""
    links = []
    pos = 0.0
    v = start
    e = first_edge
    while True:
        forward = e.endpoints[0] == v
        links.append(ChainLink(e.id, forward, pos))
        pos += e.length
        v = e.endpoints[1] if forward else e.endpoints[0]
        if kind == "cycle" and v == start:
            break
        if kind == "path" and g.vertices[v].kind == "terminal":
            break
        nxt = [eid for _, eid in g.neighbors(v) if eid != e.id]
        e = g.edges[nxt[0]]
    return Chain(kind, start, v, pos, tuple(links))


# ---------------------------------------------------------------------------
# motifs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MotifInstance:
    """One star or lollipop motif centered on an internal vertex.

    Prong chains are the pendant and connector elements attached to the
    center; connectors double as coupling channels to neighboring motifs.
    """
    kind: str                 # "star" | "lollipop"
    center: int
    prongs: tuple[Chain, ...]
    loops: tuple[Chain, ...]
    couplings: tuple[Chain, ...] = field(default=())
    folded_vertices: tuple[int, ...] = field(default=())


def motif_decompose(g: GraphSpec) -> list[MotifInstance]:
    """Decompose a graph into star/lollipop motifs joined by shared chains.

    Every internal vertex belongs to exactly one motif: centers own their
    motif, degree-2 vertices fold into the chain that traverses them (chains
    are owned by the lower-id center; connector chains are also recorded as
    coupling channels on both motifs).
    """
    eff = effective_structure(g)
    chain_owner = {}

    def interior_vertices(chain: Chain) -> list[int]:
        out = []
        v = chain.v_start
        for link in chain.links[:-1]:
            e = g.edges[link.edge_id]
            v = e.endpoints[1] if link.forward else e.endpoints[0]
            out.append(v)
        return out

    if eff.special is not None:
        # a bare wire or cycle: a single degenerate "motif" with no center
        interior = [v.id for v in g.vertices if v.kind == "internal"]
        return [MotifInstance("star" if eff.kind == "path" else "lollipop",
                              eff.special.v_start, (eff.special,), (),
                              (), tuple(interior))]

    motifs = []
    for c in eff.centers:
        prongs = tuple(ch for ch in eff.pendants if ch.v_start == c)
        conns = tuple(ch for ch in eff.connectors
                      if c in (ch.v_start, ch.v_end))
        loops = tuple(ch for ch in eff.loops if ch.v_start == c)
        folded = [c]
        for ch in prongs + loops:
            folded.extend(interior_vertices(ch))
        for ch in conns:
            owner = min(ch.v_start, ch.v_end)
            if owner == c:
                folded.extend(interior_vertices(ch))
        kind = "lollipop" if loops else "star"
        motifs.append(MotifInstance(kind, c, prongs + conns, loops, conns,
                                    tuple(sorted(set(folded)))))
    return motifs


# ---------------------------------------------------------------------------
# topology classification
# ---------------------------------------------------------------------------

def _signature(g: GraphSpec):
    eff = effective_structure(g)
    if eff.special is not None:
        return (eff.kind, len(g.edges))
    per_center = []
    for c in eff.centers:
        pend = sorted(len(ch.links) for ch in eff.pendants if ch.v_start == c)
        loop = sorted(len(ch.links) for ch in eff.loops if ch.v_start == c)
        conn = sum(1 for ch in eff.connectors if c in (ch.v_start, ch.v_end))
        per_center.append((tuple(pend), tuple(loop), conn))
    conn_lens = sorted(len(ch.links) for ch in eff.connectors)
    return ("composite", tuple(sorted(per_center)), tuple(conn_lens))


def infer_topology_class(g: GraphSpec) -> str:
    """Best-effort classification by degree sequence and cycle structure."""
    if g.delta is not None:
        return "delta-wire"
    sig = _signature(g)
    if sig[0] == "path":
        return "wire" if sig[1] == 1 else "bent-wire"
    if sig[0] == "cycle":
        return "loop"

    _, per_center, conn_lens = sig
    if len(per_center) == 1:
        pend, loop, conn = per_center[0]
        if not loop and conn == 0:
            if all(n == 1 for n in pend):
                return f"{len(pend)}-star"
            if sorted(pend) == [1, 1, 2]:
                return "open-lollipop"
        if len(loop) == 1 and conn == 0:
            if pend == (1,):
                return "lollipop"
            if pend == (1, 1):
                return "lollipop-bull"
            if len(pend) == 1:
                return "barbell-star-loop"
    if len(per_center) == 2:
        a, b = per_center
        if a == ((1, 1), (), 1) and b == ((1, 1), (), 1) and conn_lens == (1,):
            return "star-star"
        if a == ((1, 2), (), 1) and b == ((1, 2), (), 1) and conn_lens == (1,):
            return "barbell-dual-2fork"
        if {a, b} == {((), (3,), 1), ((1, 1), (), 1)}:
            return "pop-star"
        if {a, b} == {((), (3,), 1), ((1, 2), (), 1)}:
            return "barbell-2fork-pop"
        if a == ((), (3,), 1) and b == ((), (3,), 1):
            return "barbell-loop"
        if a == ((1,), (), 2) and b == ((1,), (), 2) and conn_lens == (1, 2):
            return "bull"
        if a == ((1, 1), (), 2) and b == ((1, 1), (), 2) and conn_lens == (2, 2):
            return "bubble"
    return "custom"


# classes that share a structural signature with a plain path
PATH_LIKE = {"wire", "bent-wire", "wire-lollipop", "barbell-line"}


def class_consistent(g: GraphSpec) -> bool:
    """Whether the stored topology class matches the adjacency structure."""
    if g.topology_class == "custom":
        return True
    inferred = infer_topology_class(g)
    if g.topology_class == inferred:
        return True
    return inferred in PATH_LIKE and g.topology_class in PATH_LIKE
