# app/services/graph_core.py

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx

from app.models.errors import GraphError, InputError
from app.models.schemas import EdgeRecord, GraphFile, TailRecord, ValidationIssue

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Branch:
    """Oriented edge (sign +1 / -1) or tail (sign 0)."""

    id: str
    sign: int = 1

    def __neg__(self) -> "Branch":
        if self.sign == 0:
            raise GraphError(f"tail {self.id} has no reverse orientation")
        return Branch(self.id, -self.sign)

    def __str__(self) -> str:
        return f"-{self.id}" if self.sign < 0 else self.id

    @property
    def is_tail(self) -> bool:
        return self.sign == 0

    @property
    def sort_key(self) -> Tuple[str, int]:
        return (self.id, 0 if self.sign >= 0 else 1)


@dataclass(frozen=True)
class Edge:
    id: str
    source: str  # v_{-e}
    target: str  # v_e

    @property
    def is_loop(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True)
class Tail:
    id: str
    vertex: str
    nu: int


@dataclass(frozen=True)
class EdgePath:
    branches: Tuple[Branch, ...] = ()

    def __len__(self) -> int:
        return len(self.branches)

    def __iter__(self) -> Iterator[Branch]:
        return iter(self.branches)

    def __add__(self, other: "EdgePath") -> "EdgePath":
        return EdgePath(self.branches + other.branches)

    def __str__(self) -> str:
        return "·".join(str(b) for b in self.branches) or "1"

    def inverse(self) -> "EdgePath":
        return EdgePath(tuple(-b for b in reversed(self.branches)))

    def is_reduced(self) -> bool:
        return all(b2 != -b1 for b1, b2 in zip(self.branches, self.branches[1:]))

    def reduced(self) -> "EdgePath":
        return EdgePath(reduce_path(self.branches))


def reduce_path(branches: Iterable[Branch]) -> Tuple[Branch, ...]:
    stack: List[Branch] = []
    for b in branches:
        if stack and stack[-1] == -b:
            stack.pop()
        else:
            stack.append(b)
    return tuple(stack)


def cyclic_reduction(path: EdgePath) -> Tuple[EdgePath, EdgePath]:
    """Split a closed path as sigma · kappa · sigma^-1 with kappa cyclically reduced."""
    p = reduce_path(path.branches)
    sigma: List[Branch] = []
    while len(p) >= 2 and p[0] == -p[-1]:
        sigma.append(p[0])
        p = p[1:-1]
    return EdgePath(tuple(sigma)), EdgePath(p)


@dataclass(frozen=True)
class StableGraph:
    vertices: Tuple[str, ...]
    edges: Tuple[Edge, ...]
    tails: Tuple[Tail, ...] = ()
    infinity: FrozenSet[Branch] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(sorted(self.vertices)))
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=lambda e: e.id)))
        object.__setattr__(self, "tails", tuple(sorted(self.tails, key=lambda t: t.id)))
        object.__setattr__(self, "infinity", frozenset(self.infinity))

    # --- lookups --------------------------------------------------------

    @property
    def edge_ids(self) -> List[str]:
        return [e.id for e in self.edges]

    @property
    def tail_ids(self) -> List[str]:
        return [t.id for t in self.tails]

    def edge(self, eid: str) -> Edge:
        for e in self.edges:
            if e.id == eid:
                return e
        raise GraphError(f"unknown edge {eid!r}")

    def tail(self, tid: str) -> Tail:
        for t in self.tails:
            if t.id == tid:
                return t
        raise GraphError(f"unknown tail {tid!r}")

    def require_vertex(self, v: str) -> None:
        if v not in self.vertices:
            raise GraphError(f"unknown vertex {v!r}")

    def parse_branch(self, text: str) -> Branch:
        text = text.strip()
        if text.startswith("-"):
            eid = text[1:]
            self.edge(eid)
            return Branch(eid, -1)
        if text in self.tail_ids:
            return Branch(text, 0)
        self.edge(text)
        return Branch(text, 1)

    def terminal(self, h: Branch) -> str:
        """The vertex v_h."""
        if h.is_tail:
            return self.tail(h.id).vertex
        e = self.edge(h.id)
        return e.target if h.sign > 0 else e.source

    def all_branches(self) -> List[Branch]:
        out = [Branch(e.id, s) for e in self.edges for s in (1, -1)]
        out += [Branch(t.id, 0) for t in self.tails]
        return sorted(out, key=lambda b: b.sort_key)

    def branches_at(self, v: str) -> List[Branch]:
        return [h for h in self.all_branches() if self.terminal(h) == v]

    def degree(self, v: str) -> int:
        return len(self.branches_at(v))

    def to_networkx(self) -> nx.MultiGraph:
        G = nx.MultiGraph()
        G.add_nodes_from(self.vertices)
        for e in self.edges:
            G.add_edge(e.source, e.target, key=e.id)
        return G

    # --- file model -----------------------------------------------------

    @classmethod
    def from_model(cls, model: GraphFile) -> "StableGraph":
        edges = [Edge(r.id, r.from_, r.to) for r in model.edges]
        tails = [Tail(r.id, r.vertex, r.nu) for r in model.tails]
        tail_ids = {t.id for t in tails}
        infinity = set()
        for text in model.infinity:
            if text.startswith("-"):
                infinity.add(Branch(text[1:], -1))
            else:
                infinity.add(Branch(text, 0 if text in tail_ids else 1))
        return cls(tuple(model.vertices), tuple(edges), tuple(tails), frozenset(infinity))

    def to_model(self) -> GraphFile:
        return GraphFile(
            vertices=list(self.vertices),
            edges=[
                EdgeRecord(id=e.id, from_=e.source, to=e.target, loop=e.is_loop)
                for e in self.edges
            ],
            tails=[TailRecord(id=t.id, vertex=t.vertex, nu=t.nu) for t in self.tails],
            infinity=sorted(str(b) for b in self.infinity),
        )


# --- validation -----------------------------------------------------------

def _issue(field_name: str, text: str) -> ValidationIssue:
    return ValidationIssue(field=field_name, issue=text, severity="critical")


def is_connected(graph: StableGraph) -> bool:
    if not graph.vertices:
        return False
    return nx.is_connected(graph.to_networkx())


def validate_stable(graph: StableGraph) -> List[ValidationIssue]:
    """All violated stable-graph invariants; an empty list means valid."""
    issues: List[ValidationIssue] = []
    vertex_set = set(graph.vertices)

    ids = [e.id for e in graph.edges] + [t.id for t in graph.tails]
    for name, count in sorted(Counter(ids).items()):
        if count > 1:
            issues.append(_issue(name, "duplicate edge/tail id"))
    for name in list(graph.vertices) + ids:
        if not name or name.startswith("-"):
            issues.append(_issue(name, "ids must be non-empty and may not start with '-'"))

    dangling = False
    for e in graph.edges:
        for end in (e.source, e.target):
            if end not in vertex_set:
                issues.append(_issue(e.id, f"edge endpoint {end!r} is not a vertex"))
                dangling = True
    for t in graph.tails:
        if t.vertex not in vertex_set:
            issues.append(_issue(t.id, f"tail vertex {t.vertex!r} is not a vertex"))
            dangling = True
    if dangling:
        return issues

    if not is_connected(graph):
        issues.append(_issue("vertices", "not connected"))

    for v in graph.vertices:
        if graph.degree(v) < 3:
            issues.append(_issue(v, "vertex branch count < 3"))

    nus = sorted(t.nu for t in graph.tails)
    if nus != list(range(1, len(graph.tails) + 1)):
        issues.append(_issue("tails", "numbering nu is not a bijection onto 1..n"))

    known = set(graph.all_branches())
    members = sorted(graph.infinity, key=lambda b: b.sort_key)
    for h in members:
        if h not in known:
            issues.append(_issue(str(h), "infinity set names an unknown branch"))
    members = [h for h in members if h in known]
    for h in members:
        if not h.is_tail and -h in graph.infinity:
            issues.append(_issue(h.id, "infinity set contains an edge together with its reverse"))
    seen: Dict[str, Branch] = {}
    for h in members:
        v = graph.terminal(h)
        if v in seen:
            issues.append(_issue(str(h), f"infinity set has two branches ending at {v}"))
        seen[v] = h
    return issues


def type_of(graph: StableGraph) -> Tuple[int, int]:
    if not is_connected(graph):
        raise GraphError("not connected")
    return len(graph.edges) - len(graph.vertices) + 1, len(graph.tails)


# --- fundamental group ----------------------------------------------------

@lru_cache(maxsize=256)
def maximal_subtree(graph: StableGraph) -> FrozenSet[str]:
    """Kruskal spanning tree with edges ranked by id, so the choice is reproducible."""
    if not is_connected(graph):
        raise GraphError("not connected")
    G = nx.MultiGraph()
    G.add_nodes_from(graph.vertices)
    for rank, e in enumerate(graph.edges):
        if not e.is_loop:
            G.add_edge(e.source, e.target, key=e.id, rank=rank)
    tree = nx.minimum_spanning_edges(G, algorithm="kruskal", weight="rank", keys=True, data=False)
    return frozenset(key for _, _, key in tree)


def generator_edges(graph: StableGraph) -> List[str]:
    tree = maximal_subtree(graph)
    return [e.id for e in graph.edges if e.id not in tree]


def tree_path(graph: StableGraph, start: str, end: str) -> EdgePath:
    graph.require_vertex(start)
    graph.require_vertex(end)
    T = nx.Graph()
    T.add_nodes_from(graph.vertices)
    for eid in maximal_subtree(graph):
        e = graph.edge(eid)
        T.add_edge(e.source, e.target, id=eid)
    nodes = nx.shortest_path(T, start, end)
    path = []
    for u, w in zip(nodes, nodes[1:]):
        e = graph.edge(T[u][w]["id"])
        path.append(Branch(e.id, 1 if (e.source, e.target) == (u, w) else -1))
    return EdgePath(tuple(path))


def tail_path(graph: StableGraph, t: str, base: str) -> EdgePath:
    return tree_path(graph, graph.tail(t).vertex, base)


def fundamental_group_generators(graph: StableGraph, base: str) -> List[EdgePath]:
    graph.require_vertex(base)
    generators = []
    for eid in generator_edges(graph):
        e = graph.edge(eid)
        path = tree_path(graph, base, e.source) + EdgePath((Branch(eid, 1),)) + tree_path(graph, e.target, base)
        generators.append(path.reduced())
    return generators


# --- the splitting move ---------------------------------------------------

def _fresh(taken: Iterable[str], stem: str) -> str:
    taken = set(taken)
    k = 0
    while f"{stem}{k}" in taken:
        k += 1
    return f"{stem}{k}"


def split_vertex(
    graph: StableGraph,
    v0: str,
    h1: Branch,
    h2: Branch,
    new_vertex: Optional[str] = None,
    new_edge: Optional[str] = None,
) -> Tuple[StableGraph, str]:
    """
    Replace v0 by a new edge h0 with v_h0 = v0. The branches h1, h2 stay at
    v0; every other branch of v0 moves to the new vertex v_-h0.
    """
    graph.require_vertex(v0)
    at_v0 = graph.branches_at(v0)
    if len(at_v0) <= 3:
        raise GraphError("cannot split trivalent vertex")
    for h in (h1, h2):
        if h not in at_v0:
            raise GraphError(f"branch {h} is not incident to {v0}")
    if h1 == h2:
        raise GraphError("split needs two distinct branches")

    ids = list(graph.vertices) + graph.edge_ids + graph.tail_ids
    w = new_vertex or _fresh(ids, f"{v0}~v")
    h0 = new_edge or _fresh(ids + [w], f"{v0}~e")
    if w in ids or h0 in ids or w == h0:
        raise GraphError("new vertex/edge ids must be unused")

    moved = set(at_v0) - {h1, h2}
    edges = []
    for e in graph.edges:
        source, target = e.source, e.target
        if Branch(e.id, 1) in moved:
            target = w
        if Branch(e.id, -1) in moved:
            source = w
        edges.append(Edge(e.id, source, target))
    edges.append(Edge(h0, w, v0))
    tails = [Tail(t.id, w if Branch(t.id, 0) in moved else t.vertex, t.nu) for t in graph.tails]
    logger.debug(f"split {v0} keeping {h1}, {h2}; new edge {h0} from {w}")
    return StableGraph(graph.vertices + (w,), tuple(edges), tuple(tails), graph.infinity), h0


def contract_edge(graph: StableGraph, eid: str) -> StableGraph:
    """Merge v_-e into v_e, keeping the id of v_e."""
    e = graph.edge(eid)
    if e.is_loop:
        raise GraphError("cannot contract a loop")
    gone, kept = e.source, e.target

    def relabel(v: str) -> str:
        return kept if v == gone else v

    edges = tuple(Edge(f.id, relabel(f.source), relabel(f.target)) for f in graph.edges if f.id != eid)
    tails = tuple(Tail(t.id, relabel(t.vertex), t.nu) for t in graph.tails)
    vertices = tuple(v for v in graph.vertices if v != gone)
    infinity = frozenset(h for h in graph.infinity if h.id != eid)
    return StableGraph(vertices, edges, tails, infinity)


def is_isomorphic(a: StableGraph, b: StableGraph) -> bool:
    """Isomorphism of graphs with tails, matching tails by their numbering."""

    def labelled(graph: StableGraph) -> nx.MultiGraph:
        G = nx.MultiGraph()
        for v in graph.vertices:
            G.add_node(("v", v), kind="vertex", nu=None)
        for e in graph.edges:
            G.add_edge(("v", e.source), ("v", e.target))
        for t in graph.tails:
            G.add_node(("t", t.id), kind="tail", nu=t.nu)
            G.add_edge(("t", t.id), ("v", t.vertex))
        return G

    return nx.is_isomorphic(
        labelled(a),
        labelled(b),
        node_match=lambda x, y: x["kind"] == y["kind"] and x["nu"] == y["nu"],
    )


# --- standard shapes ------------------------------------------------------

def one_vertex_graph(g: int, n: int) -> StableGraph:
    loops = tuple(Edge(f"l{i}", "v0", "v0") for i in range(1, g + 1))
    tails = tuple(Tail(f"t{k}", "v0", k) for k in range(1, n + 1))
    return StableGraph(("v0",), loops, tails)


def lollipop_graph(g: int, n: int) -> StableGraph:
    """v0 carries the tails; e_i runs from v_i into v0 and v_i carries the loop l_i."""
    vertices = ("v0",) + tuple(f"v{i}" for i in range(1, g + 1))
    edges = []
    for i in range(1, g + 1):
        edges.append(Edge(f"e{i}", f"v{i}", "v0"))
        edges.append(Edge(f"l{i}", f"v{i}", f"v{i}"))
    tails = tuple(Tail(f"t{k}", "v0", k) for k in range(1, n + 1))
    return StableGraph(vertices, tuple(edges), tails)


def parse_branches(graph: StableGraph, texts: Sequence[str]) -> List[Branch]:
    try:
        return [graph.parse_branch(t) for t in texts]
    except GraphError as e:
        raise InputError(str(e)) from e
