"""Undirected labeled graphs and the Cartesian graph product.

Vertex labels are strings or integers; product vertices are (left, right)
pairs.  Graphs are immutable after construction and every derived quantity
(adjacency, connectivity, diameter, acyclicity, completeness) is computed
once at build time.
"""

from __future__ import annotations

import re
from collections import deque
from collections.abc import Hashable, Iterable

Label = Hashable

# Charset keeps labels unambiguous in the text format (edges are "u-v")
# and in broker/link identifiers ("(a,0)", "(a,0)->(b,0)").
_LABEL_RE = re.compile(r"^[A-Za-z0-9_.]+$")


class GraphError(ValueError):
    """Malformed graph description or unsupported graph operation."""


def _check_label(label: Label, *, allow_pair: bool = False) -> None:
    if isinstance(label, tuple):
        if not allow_pair:
            raise GraphError(f"nested product label not allowed here: {label!r}")
        if len(label) != 2:
            raise GraphError(f"product labels must be pairs: {label!r}")
        for part in label:
            _check_label(part, allow_pair=False)
        return
    if isinstance(label, bool) or not isinstance(label, (str, int)):
        raise GraphError(f"unsupported vertex label type: {label!r}")
    if isinstance(label, str) and not _LABEL_RE.match(label):
        raise GraphError(f"invalid vertex label {label!r} (allowed: letters, digits, _ .)")


class Graph:
    """Finite undirected graph with labeled vertices."""

    __slots__ = ("vertices", "edges", "_adj", "_pos", "_diameter", "_unreachable",
                 "_acyclic", "_complete")

    def __init__(self, vertices: Iterable[Label], edges: Iterable[tuple[Label, Label]],
                 *, allow_pair_labels: bool = False):
        verts = tuple(vertices)
        if not verts:
            raise GraphError("graph must have at least one vertex")
        seen: set[Label] = set()
        for v in verts:
            _check_label(v, allow_pair=allow_pair_labels)
            if v in seen:
                raise GraphError(f"duplicate vertex label {v!r}")
            seen.add(v)
        self._pos = {v: i for i, v in enumerate(verts)}

        adj: dict[Label, list[Label]] = {v: [] for v in verts}
        canon: list[tuple[Label, Label]] = []
        edge_set: set[frozenset] = set()
        for u, v in edges:
            if u not in self._pos or v not in self._pos:
                raise GraphError(f"edge ({u!r}, {v!r}) references unknown vertex")
            if u == v:
                raise GraphError(f"self-loop on {u!r} not allowed")
            key = frozenset((u, v))
            if key in edge_set:
                raise GraphError(f"duplicate edge ({u!r}, {v!r})")
            edge_set.add(key)
            if self._pos[u] > self._pos[v]:
                u, v = v, u
            canon.append((u, v))
            adj[u].append(v)
            adj[v].append(u)

        self.vertices = verts
        self.edges = tuple(canon)
        # neighbour order follows vertex declaration order for determinism
        self._adj = {v: tuple(sorted(ns, key=self._pos.__getitem__)) for v, ns in adj.items()}
        self._analyze()

    # ---- derived quantities ----

    def _analyze(self) -> None:
        dist = self.distances_from(self.vertices[0])
        if len(dist) < len(self.vertices):
            missing = next(v for v in self.vertices if v not in dist)
            self._unreachable = (self.vertices[0], missing)
            self._diameter = None
        else:
            self._unreachable = None
            ecc = 0
            for v in self.vertices:
                ecc = max(ecc, max(self.distances_from(v).values()))
            self._diameter = ecc
        n = len(self.vertices)
        self._acyclic = self._has_no_cycle()
        self._complete = len(self.edges) == n * (n - 1) // 2

    def _has_no_cycle(self) -> bool:
        # iterative DFS over each component, tracking the arrival edge
        seen: set[Label] = set()
        for root in self.vertices:
            if root in seen:
                continue
            stack = [(root, None)]
            seen.add(root)
            while stack:
                v, parent = stack.pop()
                for w in self._adj[v]:
                    if w == parent:
                        parent = None  # skip the arrival edge exactly once
                        continue
                    if w in seen:
                        return False
                    seen.add(w)
                    stack.append((w, v))
        return True

    # ---- queries ----

    @property
    def order(self) -> int:
        return len(self.vertices)

    @property
    def size(self) -> int:
        return len(self.edges)

    def neighbours(self, v: Label) -> tuple[Label, ...]:
        try:
            return self._adj[v]
        except KeyError:
            raise GraphError(f"unknown vertex {v!r}") from None

    def has_edge(self, u: Label, v: Label) -> bool:
        return u in self._adj and v in self._adj[u]

    def position(self, v: Label) -> int:
        try:
            return self._pos[v]
        except KeyError:
            raise GraphError(f"unknown vertex {v!r}") from None

    def distances_from(self, src: Label) -> dict[Label, int]:
        """BFS hop distances to every reachable vertex."""
        if src not in self._pos:
            raise GraphError(f"unknown vertex {src!r}")
        dist = {src: 0}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            for w in self._adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        return dist

    def is_connected(self) -> bool:
        return self._unreachable is None

    def __repr__(self) -> str:
        return f"Graph(|V|={self.order}, |E|={self.size})"


def diameter(g: Graph) -> int:
    """Longest shortest-path distance; raises on disconnected graphs."""
    if g._diameter is None:
        u, v = g._unreachable
        raise GraphError(f"graph is disconnected: no path between {u!r} and {v!r}")
    return g._diameter


def is_acyclic(g: Graph) -> bool:
    return g._acyclic


def is_complete(g: Graph) -> bool:
    return g._complete


def cartesian_product(g: Graph, h: Graph) -> Graph:
    """Cartesian product: vertices are pairs, edges change one coordinate.

    (u, x) is adjacent to (v, y) iff u == v and x-y is an edge of h, or
    u-v is an edge of g and x == y.  Operands must not already be products
    (pair labels are rejected to keep coordinates unambiguous).
    """
    for operand in (g, h):
        if any(isinstance(v, tuple) for v in operand.vertices):
            raise GraphError("product of product graphs is not supported")
    vertices = [(a, b) for a in g.vertices for b in h.vertices]
    edges: list[tuple[Label, Label]] = []
    for a in g.vertices:
        for x, y in h.edges:
            edges.append(((a, x), (a, y)))
    for u, v in g.edges:
        for b in h.vertices:
            edges.append(((u, b), (v, b)))
    product = Graph(vertices, edges, allow_pair_labels=True)
    assert product.size == g.size * h.order + g.order * h.size
    return product


# ---- generators ----

def make_path(n: int) -> Graph:
    if n < 1:
        raise GraphError("path needs at least one vertex")
    return Graph(range(n), [(i, i + 1) for i in range(n - 1)])


def make_star(n: int) -> Graph:
    if n < 1:
        raise GraphError("star needs at least one vertex")
    return Graph(range(n), [(0, i) for i in range(1, n)])


def make_complete(n: int) -> Graph:
    if n < 1:
        raise GraphError("complete graph needs at least one vertex")
    return Graph(range(n), [(i, j) for i in range(n) for j in range(i + 1, n)])


def make_tree(edges: Iterable[tuple[Label, Label]]) -> Graph:
    """Build a tree from an edge list; vertices appear in first-seen order."""
    pairs = list(edges)
    if not pairs:
        raise GraphError("tree edge list is empty")
    verts: list[Label] = []
    seen: set[Label] = set()
    for pair in pairs:
        if not isinstance(pair, (tuple, list)) or len(pair) != 2:
            raise GraphError(f"malformed edge entry {pair!r}")
        for v in pair:
            if v not in seen:
                seen.add(v)
                verts.append(v)
    g = Graph(verts, [tuple(p) for p in pairs])
    if not g.is_connected():
        u, v = g._unreachable
        raise GraphError(f"edge list is not connected: no path between {u!r} and {v!r}")
    if not g._acyclic:
        raise GraphError("edge list contains a cycle")
    return g


# ---- text format ----
#
#   # comment
#   vertices: a b c
#   edges: a-b b-c

def parse_graph_text(text: str) -> Graph:
    vertices: list[str] = []
    edges: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("vertices:"):
            vertices.extend(line[len("vertices:"):].split())
        elif line.startswith("edges:"):
            for token in line[len("edges:"):].split():
                parts = token.split("-")
                if len(parts) != 2 or not all(parts):
                    raise GraphError(f"line {lineno}: malformed edge token {token!r}")
                edges.append((parts[0], parts[1]))
        else:
            raise GraphError(f"line {lineno}: expected 'vertices:' or 'edges:', got {raw!r}")
    if not vertices:
        raise GraphError("graph text declares no vertices")
    return Graph(vertices, edges)


def format_graph_text(g: Graph) -> str:
    lines = ["vertices: " + " ".join(str(v) for v in g.vertices)]
    if g.edges:
        lines.append("edges: " + " ".join(f"{u}-{v}" for u, v in g.edges))
    return "\n".join(lines) + "\n"


def graph_from_dict(spec: dict) -> Graph:
    """Build a graph from a config mapping: generator form or explicit form."""
    if "generator" in spec:
        kind = spec["generator"]
        makers = {"path": make_path, "star": make_star, "complete": make_complete}
        if kind == "tree":
            return make_tree([tuple(e) for e in spec.get("edges", [])])
        if kind not in makers:
            raise GraphError(f"unknown graph generator {kind!r}")
        n = spec.get("n")
        if not isinstance(n, int):
            raise GraphError(f"generator {kind!r} needs integer field 'n'")
        return makers[kind](n)
    if "vertices" in spec:
        edges = [tuple(e) for e in spec.get("edges", [])]
        return Graph(spec["vertices"], edges)
    raise GraphError("graph spec needs 'generator' or 'vertices'")


def graph_to_dict(g: Graph) -> dict:
    return {"vertices": list(g.vertices), "edges": [list(e) for e in g.edges]}
