"""Graph construction, product, and structural predicates."""

import itertools

import pytest

from clustercast import (
    Graph,
    GraphError,
    cartesian_product,
    diameter,
    format_graph_text,
    graph_from_dict,
    graph_to_dict,
    is_acyclic,
    is_complete,
    make_complete,
    make_path,
    make_star,
    make_tree,
    parse_graph_text,
)

# six-vertex tree: two three-vertex chains joined by a crossbar at b-e
TREE6 = make_tree([("a", "b"), ("b", "c"), ("d", "e"), ("e", "f"), ("b", "e")])


def bfs_distances(g: Graph, src):
    """Independent BFS oracle used to cross-check diameter()."""
    dist = {src: 0}
    frontier = [src]
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.neighbours(u):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return dist


def oracle_diameter(g: Graph) -> int:
    return max(max(bfs_distances(g, v).values()) for v in g.vertices)


def product_edges_oracle(g: Graph, h: Graph) -> set:
    """Brute-force adjacency enumeration over all vertex pairs."""
    edges = set()
    for (g1, h1), (g2, h2) in itertools.combinations(
            itertools.product(g.vertices, h.vertices), 2):
        same_g = g1 == g2 and h.has_edge(h1, h2)
        same_h = h1 == h2 and g.has_edge(g1, g2)
        if same_g or same_h:
            edges.add(frozenset([(g1, h1), (g2, h2)]))
    return edges


# ---- constructors ----

def test_make_path():
    g = make_path(3)
    assert g.order == 3 and g.size == 2


def test_make_complete():
    g = make_complete(5)
    assert g.order == 5 and g.size == 10


def test_make_star():
    g = make_star(4)
    assert g.order == 4 and g.size == 3
    assert sorted(len(g.neighbours(v)) for v in g.vertices) == [1, 1, 1, 3]


def test_single_vertex_graph():
    g = Graph(["x"], [])
    assert g.order == 1 and g.size == 0
    assert diameter(g) == 0


def test_make_tree_rejects_cycle():
    with pytest.raises(GraphError):
        make_tree([("a", "b"), ("b", "c"), ("c", "a")])


def test_make_tree_rejects_disconnected():
    with pytest.raises(GraphError):
        make_tree([("a", "b"), ("c", "d")])


def test_no_self_loops_or_duplicate_edges():
    with pytest.raises(GraphError):
        Graph(["a", "b"], [("a", "a")])
    with pytest.raises(GraphError):
        Graph(["a", "b"], [("a", "b"), ("b", "a")])


def test_edge_endpoints_must_exist():
    with pytest.raises(GraphError):
        Graph(["a"], [("a", "b")])


def test_duplicate_vertex_labels_rejected():
    with pytest.raises(GraphError):
        Graph(["a", "a"], [])


def test_label_charset():
    with pytest.raises(GraphError):
        Graph(["bad label"], [])
    with pytest.raises(GraphError):
        Graph(["a-b"], [])


# ---- cartesian product ----

def test_product_counts_tree6_triangle():
    prod = cartesian_product(TREE6, make_complete(3))
    assert prod.order == 18
    assert prod.size == 33  # 5*3 + 6*3


def test_product_edge_set_matches_bruteforce():
    g, h = make_path(3), make_path(2)
    prod = cartesian_product(g, h)
    assert prod.order == 6
    assert prod.size == 7  # 2*2 + 3*1
    got = {frozenset(e) for e in prod.edges}
    assert got == product_edges_oracle(g, h)


def test_product_with_singleton_is_isomorphic():
    g = TREE6
    prod = cartesian_product(g, Graph(["z"], []))
    assert prod.order == g.order and prod.size == g.size
    assert all(h1 == h2 == "z" for (_, h1), (__, h2) in prod.edges)
    stripped = {frozenset([u, v]) for (u, _), (v, __) in prod.edges}
    assert stripped == {frozenset(e) for e in g.edges}


def test_empty_graph_rejected():
    with pytest.raises(GraphError):
        Graph([], [])


def test_product_of_products_rejected():
    prod = cartesian_product(make_path(2), make_path(2))
    with pytest.raises(GraphError):
        cartesian_product(prod, make_path(2))


def test_product_commutative_up_to_label_swap():
    g, h = TREE6, make_complete(3)
    gh = cartesian_product(g, h)
    hg = cartesian_product(h, g)
    swapped = {frozenset(((a2, a1), (b2, b1))) for (a1, a2), (b1, b2) in hg.edges}
    assert {frozenset(e) for e in gh.edges} == swapped


# ---- diameter and predicates ----

def test_diameter_triangle():
    assert diameter(make_complete(3)) == 1


def test_diameter_tree6_matches_bfs_oracle():
    assert diameter(TREE6) == oracle_diameter(TREE6) == 3


def test_diameter_additive_over_product():
    g, h = TREE6, make_complete(3)
    prod = cartesian_product(g, h)
    assert diameter(prod) == diameter(g) + diameter(h)
    assert diameter(prod) == oracle_diameter(prod)


def test_diameter_disconnected_names_unreachable_pair():
    g = Graph(["a", "b", "c"], [("a", "b")])
    with pytest.raises(GraphError, match="c"):
        diameter(g)


def test_is_acyclic_is_complete():
    assert is_acyclic(TREE6) and not is_complete(TREE6)
    tri = make_complete(3)
    assert not is_acyclic(tri) and is_complete(tri)
    two = make_path(2)
    assert is_acyclic(two) and is_complete(two)


# ---- text and dict formats ----

def test_parse_format_roundtrip():
    text = "vertices: a b c\nedges: a-b b-c\n"
    g = parse_graph_text(text)
    assert g.order == 3 and g.size == 2
    again = parse_graph_text(format_graph_text(g))
    assert again.vertices == g.vertices and again.edges == g.edges


def test_parse_graph_text_comments_and_errors():
    g = parse_graph_text("# chain\nvertices: x y\nedges: x-y\n")
    assert g.size == 1
    with pytest.raises(GraphError):
        parse_graph_text("edges: a-b\n")
    with pytest.raises(GraphError):
        parse_graph_text("vertices: a b\nedges: a+b\n")


def test_dict_roundtrip():
    d = graph_to_dict(TREE6)
    again = graph_from_dict(d)
    assert again.vertices == TREE6.vertices and again.edges == TREE6.edges
