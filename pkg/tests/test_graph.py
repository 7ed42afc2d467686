import itertools

import pytest
from hypothesis import given, settings, strategies as st

from idsearch.graph import (
    MAX_VARIABLES,
    CausalGraph,
    GraphError,
    VarKind,
    augment_missing,
    bits,
    parse_graph,
    subsets,
)
from idsearch.scenarios import FIG1_GRAPHS, FIG3_GRAPH, FIG4_GRAPHS, FIG4_MISSING


# -- independent oracle: explicit latents + simple-path enumeration ---------------


def _explicit(g: CausalGraph):
    """Directed edge list with one latent node per bidirected edge."""
    n = len(g)
    edges = list(g.directed_edges)
    for k, (a, b) in enumerate(g.bidirected_edges):
        u = n + k
        edges += [(u, a), (u, b)]
    return n + len(g.bidirected_edges), edges


def path_dsep(g: CausalGraph, a, b, c) -> bool:
    n, edges = _explicit(g)
    children = {v: set() for v in range(n)}
    for x, y in edges:
        children[x].add(y)
    desc = {}
    for v in range(n):
        seen, stack = {v}, [v]
        while stack:
            for w in children[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        desc[v] = seen
    nbrs = {v: set() for v in range(n)}
    for x, y in edges:
        nbrs[x].add(y)
        nbrs[y].add(x)
    cset = set(bits(c))

    def active(path):
        for i in range(1, len(path) - 1):
            prev, mid, nxt = path[i - 1], path[i], path[i + 1]
            collider = mid in children[prev] and mid in children[nxt]
            if collider:
                if not (desc[mid] & cset):
                    return False
            elif mid in cset:
                return False
        return True

    def walk(path):
        last = path[-1]
        if last in targets:
            return active(path)
        for w in nbrs[last]:
            if w not in path and walk(path + [w]):
                return True
        return False

    targets = set(bits(b))
    return not any(walk([s]) for s in bits(a))


PUBLISHED = [parse_graph(t) for t in FIG1_GRAPHS.values()]
PUBLISHED += [parse_graph(FIG3_GRAPH)]
PUBLISHED += [augment_missing(parse_graph(t), FIG4_MISSING) for t in FIG4_GRAPHS.values()]


def _all_queries(g, max_c=None):
    n = len(g)
    for a in range(n):
        for b in range(a + 1, n):
            rest = g.all & ~(1 << a | 1 << b)
            for c in [0, *subsets(rest, max_c)]:
                yield 1 << a, 1 << b, c


@pytest.mark.parametrize("g", PUBLISHED, ids=lambda g: f"{len(g)}vars")
def test_bayes_ball_agrees_with_path_oracle_on_fixture_graphs(g):
    max_c = None if len(g) <= 7 else 3
    checked = 0
    for a, b, c in _all_queries(g, max_c):
        assert g.d_separated(a, b, c) == path_dsep(g, a, b, c), (g.names_of(a), g.names_of(b), g.names_of(c))
        checked += 1
    assert checked > 0


@st.composite
def random_graphs(draw, max_vars=7):
    n = draw(st.integers(2, max_vars))
    names = [f"V{i}" for i in range(n)]
    pairs = list(itertools.combinations(range(n), 2))
    directed = [p for p in pairs if draw(st.booleans())]
    bidirected = [p for p in pairs if draw(st.integers(0, 4)) == 0]
    perm = draw(st.permutations(range(n)))
    directed = [(perm[a], perm[b]) for a, b in directed]
    bidirected = [(perm[a], perm[b]) for a, b in bidirected]
    return CausalGraph(names, directed, bidirected)


@settings(max_examples=500, deadline=None)
@given(random_graphs(), st.data())
def test_bayes_ball_agrees_with_path_oracle_on_random_graphs(g, data):
    n = len(g)
    a = 1 << data.draw(st.integers(0, n - 1))
    b = 1 << data.draw(st.integers(0, n - 1).filter(lambda i: not a >> i & 1))
    rest = [i for i in range(n) if not (a | b) >> i & 1]
    c = sum(1 << i for i in rest if data.draw(st.booleans()))
    assert g.d_separated(a, b, c) == path_dsep(g, a, b, c)


@settings(max_examples=200, deadline=None)
@given(random_graphs(), st.data())
def test_cut_sets_match_explicit_mutilation(g, data):
    n = len(g)
    cut_in = sum(1 << i for i in range(n) if data.draw(st.booleans()))
    cut_out = sum(1 << i for i in range(n) if data.draw(st.booleans()))
    h = g.mutilate(cut_in, cut_out)
    for a, b, c in itertools.islice(_all_queries(g, 2), 40):
        assert g.dsep(a, b, c, cut_in, cut_out) == path_dsep(h, a, b, c)


@settings(max_examples=200, deadline=None)
@given(random_graphs(), st.data())
def test_d_separation_is_symmetric(g, data):
    n = len(g)
    i, j = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    c = sum(1 << k for k in range(n) if k not in (i, j) and data.draw(st.booleans()))
    assert g.d_separated(1 << i, 1 << j, c) == g.d_separated(1 << j, 1 << i, c)


@settings(max_examples=200, deadline=None)
@given(random_graphs())
def test_dsl_round_trip(g):
    h = parse_graph(g.to_dsl())
    assert h == g
    assert h.names == g.names


@settings(max_examples=100, deadline=None)
@given(random_graphs())
def test_ancestors_are_closed_and_contain_parents(g):
    for v in range(len(g)):
        anc = g.ancestors(1 << v)
        assert anc >> v & 1
        for w in bits(anc):
            assert g.parents[w] & ~anc == 0
        assert g.descendants(1 << v) >> v & 1


def test_mutilation_drops_incoming_edges_and_their_latents():
    g = parse_graph("X -> Z\nZ -> Y\nX <-> Y\nX <-> Z")
    x, z = g.index("X"), g.index("Z")
    h = g.mutilate(cut_incoming=1 << z)
    assert (x, z) not in h.directed_edges
    assert all(z not in e for e in h.bidirected_edges)
    assert h.bidirected_edges == ((g.index("X"), g.index("Y")),)
    k = g.mutilate(cut_outgoing=1 << x)
    assert (x, z) not in k.directed_edges
    assert k.bidirected_edges == g.bidirected_edges


def test_repeated_edge_statements_collapse():
    g = parse_graph(FIG1_GRAPHS["a"])
    assert len(g.directed_edges) == 2
    assert g.names == ("X", "Z", "Y")


def test_lone_names_declare_isolated_vertices():
    g = parse_graph("X -> Y\nW")
    assert g.names == ("X", "Y", "W")
    assert g.parents[2] == g.children[2] == g.siblings[2] == 0


@pytest.mark.parametrize(
    "text",
    ["X -> Y\nY -> X", "X -> X", "X <-> X", "X ->", "-> Y", "X -> Y -> "],
)
def test_malformed_graph_text_is_rejected(text):
    with pytest.raises(GraphError):
        parse_graph(text)


def test_variable_cap():
    ok = CausalGraph([f"V{i}" for i in range(MAX_VARIABLES)])
    assert len(ok) == MAX_VARIABLES
    with pytest.raises(GraphError, match="at most 64"):
        CausalGraph([f"V{i}" for i in range(MAX_VARIABLES + 1)])


def test_missing_data_augmentation_structure():
    g = augment_missing(parse_graph(FIG4_GRAPHS["b"]), FIG4_MISSING)
    for name in "XYZ":
        x = g.index(name)
        p = g.index(name + "*")
        r = g.index("R_" + name)
        assert g.kind(p) is VarKind.PROXY
        assert g.kind(r) is VarKind.INDICATOR
        assert g.parents[p] == (1 << x | 1 << r)
        assert g.children[p] == 0 and g.siblings[p] == 0
        assert g.proxy_for[x] == p and g.proxy_of[p] == x and g.indicator_of[x] == r


def test_missing_data_rejects_unknown_target():
    with pytest.raises(GraphError):
        augment_missing(parse_graph("X -> Y"), "R_Q : Q")
    with pytest.raises(GraphError):
        augment_missing(parse_graph("X -> Y"), "R_X X")


def test_subsets_respect_size_bound():
    mask = 0b1011
    all_subsets = list(subsets(mask))
    assert len(all_subsets) == 7 and 0 not in all_subsets
    assert all(s & ~mask == 0 for s in all_subsets)
    assert all_subsets == sorted(all_subsets)
    assert all(bin(s).count("1") <= 1 for s in subsets(mask, 1))
