import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarsekit import (
    FiniteMetricSpace,
    Kernel,
    cyclic_group,
    dihedral_group,
    path_space,
    positive_type_check,
    propagation,
    random_space,
    variation_check,
)
from coarsekit.constructions import (
    ConstructionError,
    NonStabilizingPair,
    bounded_degree_graphs,
    canonical_form,
    disjoint_union,
    fused_blocks,
    gamma_u,
    glue_local_kernel,
    limit_embedding,
    morita_conjugation_check,
    morita_interleave,
    telescope_check,
    telescope_graph,
)

from conftest import spaces

# -- telescope -----------------------------------------------------------------


def test_telescope_x4_levels(x4):
    G = telescope_graph(x4, 3)
    assert len(G.vertices) == 44
    per_level = [sum(1 for v in G.vertices if v[0] == i) for i in range(4)]
    assert per_level == [4, 10, 14, 16]
    assert G.degrees().max() <= 3


def test_telescope_single_point_is_path():
    X = FiniteMetricSpace(["o"], [[0]])
    G = telescope_graph(X, 2)
    assert len(G.vertices) == 3
    g = nx.Graph(G.edges)
    assert nx.is_isomorphic(g, nx.path_graph(3))


def test_telescope_blocks_are_paths_from_diagonal(x4):
    G = telescope_graph(x4, 3)
    idx = G.index
    g = nx.Graph(G.edges)
    for i in range(4):
        for x in range(4):
            members = [v for v in G.vertices if v[:2] == (i, x)]
            assert members[0] == (i, x, x)
            ys = [v[2] for v in members[1:]]
            assert ys == sorted(ys)
            for a, b in zip(members, members[1:]):
                assert g.has_edge(idx[a], idx[b])


def test_telescope_x4_forward_bound(x4):
    G = telescope_graph(x4, 3)
    rep = telescope_check(x4, G, R=1, i=2)
    assert rep.N == 4 and rep.forward_bound == 11
    assert rep.ok


def test_telescope_single_point_bounds():
    X = FiniteMetricSpace(["o"], [[0]])
    rep = telescope_check(X, telescope_graph(X, 2), R=1)
    assert rep.ok and rep.forward_max == 0 and rep.backward_max == 0


def test_telescope_too_shallow(x4):
    G = telescope_graph(x4, 2)
    with pytest.raises(ConstructionError, match="too shallow"):
        telescope_check(x4, G, R=2)
    with pytest.raises(ConstructionError):
        telescope_check(x4, G, R=1, i=1)
    with pytest.raises(ConstructionError):
        telescope_graph(x4, -1)


@settings(max_examples=30, deadline=None)
@given(spaces(min_n=1, max_n=7, max_w=4), st.integers(0, 4))
def test_telescope_degree_at_most_three(X, i_max):
    G = telescope_graph(X, i_max)
    assert G.degrees().max(initial=0) <= 3
    assert len(set(map(tuple, map(sorted, G.edges)))) == len(G.edges)


def test_telescope_distances_match_networkx():
    X = random_space(np.random.default_rng(7), 6, max_dist=4)
    G = telescope_graph(X, 3)
    g = nx.Graph()
    g.add_nodes_from(range(len(G.vertices)))
    g.add_edges_from(G.edges)
    D = G.base_distances()
    for a, b in itertools.product(range(X.n), repeat=2):
        try:
            want = nx.shortest_path_length(g, int(G.embedding[a]), int(G.embedding[b]))
        except nx.NetworkXNoPath:
            want = np.inf
        assert D[a, b] == want


def test_telescope_document(x4):
    doc = telescope_graph(x4, 1).to_document()
    assert doc["vertices"][0] == [0, 0, 0]
    assert all(len(e) == 2 for e in doc["edges"])


# -- bounded degree graphs ------------------------------------------------------


def atlas_counts(n_max, max_degree=3):
    """Connected graphs of max degree <= 3 per size, from the networkx graph atlas."""
    counts = {}
    for g in nx.graph_atlas_g():
        k = g.number_of_nodes()
        if 1 <= k <= n_max and nx.is_connected(g) and max((d for _, d in g.degree()), default=0) <= max_degree:
            counts[k] = counts.get(k, 0) + 1
    return counts


@pytest.mark.parametrize("n_max", [1, 2, 3, 4, 5, 6, 7])
def test_enumeration_against_atlas(n_max):
    graphs = bounded_degree_graphs(n_max)
    sizes = {}
    for A in graphs:
        sizes[A.shape[0]] = sizes.get(A.shape[0], 0) + 1
        assert A.sum(axis=1).max() <= 3
        assert nx.is_connected(nx.from_numpy_array(A))
    assert sizes == atlas_counts(n_max)


def test_small_classes():
    assert len(bounded_degree_graphs(1)) == 1
    two = bounded_degree_graphs(2)
    assert [A.shape[0] for A in two] == [1, 2]
    three = bounded_degree_graphs(3)
    edges = sorted(int(A.sum()) // 2 for A in three if A.shape[0] == 3)
    assert edges == [2, 3]  # path and triangle


def test_enumeration_cap():
    with pytest.raises(ConstructionError):
        bounded_degree_graphs(8)
    assert bounded_degree_graphs(0) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_canonical_form_invariant(k, seed):
    rng = np.random.default_rng(seed)
    A = np.triu(rng.integers(0, 2, (k, k)), 1)
    A = A + A.T
    p = rng.permutation(k)
    _, c1, C1 = canonical_form(A)
    _, c2, C2 = canonical_form(A[np.ix_(p, p)])
    assert c1 == c2
    np.testing.assert_array_equal(C1, C2)
    assert nx.is_isomorphic(nx.from_numpy_array(A), nx.from_numpy_array(C1))


def test_gamma_u_gaps():
    X = gamma_u(4)
    comps = sorted({p.split("v")[0] for p in X.points}, key=lambda c: int(c[1:]))
    assert len(comps) == len(bounded_degree_graphs(4))
    labels = np.array([p.split("v")[0] for p in X.points])
    for k, c in enumerate(comps, start=1):
        inside = labels == c
        if (~inside).any():
            assert X.dist[np.ix_(inside, ~inside)].min() >= k
        # edge metric inside: diameter below the size of the component
        assert X.dist[np.ix_(inside, inside)].max() < inside.sum()


def test_gamma_u_small():
    assert gamma_u(1).n == 1
    assert gamma_u(3).n == 1 + 2 + 3 + 3
    with pytest.raises(ConstructionError):
        gamma_u(8)


def test_disjoint_union_hub_metric():
    A, B = path_space(3, "a"), path_space(2, "b")
    U = disjoint_union([A, B], [0, 5])
    assert U.n == 5
    assert U.d("a2@0", "b1@1") == 2 + 5 + 1
    with pytest.raises(ConstructionError):
        disjoint_union([A, B], [0, 0])


# -- Morita --------------------------------------------------------------------


def test_interleave_identity_is_shift(x4):
    I = morita_interleave(list(x4.points), x4, x4, 3)
    assert all(I.mapping[(x, j)] == (x, 1 + j) for x in range(4) for j in range(-3, 4))
    assert I.injective and I.image_ok


def test_interleave_two_to_one():
    X = FiniteMetricSpace(["a", "b"], [[0, 1], [1, 0]])
    Y = FiniteMetricSpace(["y"], [[0]])
    I = morita_interleave(["y", "y"], X, Y, 4)
    assert list(I.pi) == [1, 2]
    assert {k % 2 for (x, _), (_, k) in I.mapping.items() if x == 0} == {1}
    assert {k % 2 for (x, _), (_, k) in I.mapping.items() if x == 1} == {0}
    assert I.mapping[(0, 3)] == (0, 7) and I.mapping[(1, -1)] == (0, 0)
    assert I.injective and I.image_ok


def test_interleave_not_surjective(x4):
    Y = path_space(5, "y")
    with pytest.raises(ConstructionError, match="not surjective"):
        morita_interleave(["y0", "y1", "y2", "y3"], x4, Y, 1)


@st.composite
def surjections(draw, max_mult=4):
    m = draw(st.integers(1, 5))
    mult = draw(st.lists(st.integers(1, max_mult), min_size=m, max_size=m))
    f = [y for y, c in enumerate(mult) for _ in range(c)]
    f = draw(st.permutations(f))
    n = len(f)
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return random_space(rng, n, max_dist=6), random_space(rng, m, max_dist=6, prefix="y"), list(f)


@settings(max_examples=40, deadline=None)
@given(surjections(), st.integers(0, 20))
def test_interleave_injective_with_residue_image(inst, J):
    X, Y, f = inst
    I = morita_interleave(f, X, Y, J)
    assert I.injective and I.image_ok
    assert len(I.mapping) == X.n * (2 * J + 1)


def test_conjugation_identity(x4):
    T = Kernel(np.eye(4) + np.diag(np.ones(3), 1), x4)
    rep = morita_conjugation_check(list(x4.points), x4, x4, T, (1, 1, 1, 1))
    np.testing.assert_array_equal(rep.conjugate, T.entries)
    assert rep.propagation == propagation(T) and rep.ok


def test_conjugation_collapse(x4):
    Y = path_space(2, "y")
    f = ["y0", "y0", "y1", "y1"]
    T = Kernel(np.eye(4), x4)
    for i in (1, 2):
        rep = morita_conjugation_check(f, x4, Y, T, (2, i, 2, i))
        np.testing.assert_array_equal(rep.conjugate, np.eye(2))
        assert rep.propagation == 0 and rep.ok
    off = morita_conjugation_check(f, x4, Y, T, (2, 1, 2, 2))
    assert not off.conjugate.any()


def test_conjugation_invalid_indices(x4):
    T = Kernel(np.eye(4), x4)
    with pytest.raises(ConstructionError):
        morita_conjugation_check(list(x4.points), x4, x4, T, (1, 2, 1, 1))
    with pytest.raises(ConstructionError):
        morita_conjugation_check(list(x4.points), x4, x4, T, (2, 0, 1, 1))


@settings(max_examples=50, deadline=None)
@given(surjections(), st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_conjugation_bound(inst, seed, width):
    X, Y, f = inst
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(X.n, X.n)) * (X.dist <= width)
    T = Kernel(A, X)
    fa = np.array([Y.resolve(y) for y in f])
    N = np.bincount(fa, minlength=Y.n)
    for n_, n2 in itertools.product(sorted(set(N.tolist())), repeat=2):
        for i, i2 in itertools.product(range(1, n_ + 1), range(1, n2 + 1)):
            assert morita_conjugation_check(f, X, Y, T, (n_, i, n2, i2)).ok


# -- limit embedding ---------------------------------------------------------


def test_limit_constant_family():
    G = cyclic_group(7)
    phi = {"a": 2, "b": 5, "c": 0}
    L = limit_embedding([phi, phi, phi], G)
    assert L.ok and L.base == "a"
    for (x, px), (y, py) in itertools.product(phi.items(), repeat=2):
        assert L.g[L.points.index(x), L.points.index(y)] == (py - px) % 7
    assert list(L.psi) == [(phi[p] - 2) % 7 for p in L.points]


def test_limit_left_multiplied_family():
    G = dihedral_group(4)
    phi = {"a": 1, "b": 3, "c": 6, "d": 2}
    family = []
    for h in range(G.order):
        family.append({p: int(G.table[h, v]) for p, v in phi.items()})
    L = limit_embedding(family, G)
    inv = G.inverse
    for x, y in itertools.product(phi, repeat=2):
        assert L.g[L.points.index(x), L.points.index(y)] == G.table[inv[phi[x]], phi[y]]
    assert L.ok


def test_limit_nested_domains_grow():
    G = cyclic_group(10)
    family = [{"a": 0}, {"a": 0, "b": 3}, {"a": 4, "b": 7, "c": 1}, {"a": 4, "b": 7, "c": 1}]
    L = limit_embedding(family, G)
    assert L.points == ["a", "b", "c"]
    assert L.ok


def test_limit_flipping_pair():
    G = cyclic_group(5)
    family = [{"a": 0, "b": 1}, {"a": 0, "b": 2}, {"a": 0, "b": 1}, {"a": 0, "b": 2}]
    with pytest.raises(NonStabilizingPair) as e:
        limit_embedding(family, G)
    assert set(e.value.pair) == {"a", "b"}


def test_limit_errors():
    G = cyclic_group(3)
    with pytest.raises(ConstructionError):
        limit_embedding([], G)
    with pytest.raises(ConstructionError, match="nested"):
        limit_embedding([{"a": 0, "b": 1}, {"a": 0}], G)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_limit_cocycle_exhaustive(order, n, seed):
    G = cyclic_group(order) if seed % 2 else dihedral_group(max(order // 2, 2))
    rng = np.random.default_rng(seed)
    pts = [f"p{k}" for k in range(n)]
    phi = {p: int(v) for p, v in zip(pts, rng.integers(0, G.order, n))}
    family = [{p: int(G.table[int(h), phi[p]]) for p in pts} for h in rng.integers(0, G.order, 3)]
    L = limit_embedding(family, G)
    T, inv = G.table, G.inverse
    for a, b, c in itertools.product(range(n), repeat=3):
        assert T[L.g[a, b], L.g[b, c]] == L.g[a, c]
    assert L.ok


# -- gluing --------------------------------------------------------------------


def ball_kernel(X, S):
    B = (X.dist <= S).astype(float)
    V = B / np.sqrt(B.sum(axis=1, keepdims=True))
    return Kernel(V @ V.T, X)


def test_glue_single_block():
    X = path_space(5)
    u = ball_kernel(X, 1)
    v = glue_local_kernel(X, [(X.points, u)], R=2)
    np.testing.assert_array_equal(v.entries, u.entries)


def test_glue_far_blocks_block_diagonal():
    A, B = path_space(3, "a"), path_space(3, "b")
    U = disjoint_union([A, B], [0, 20])
    u1, u2 = ball_kernel(A, 1), ball_kernel(B, 2)
    v = glue_local_kernel(U, [(U.points[:3], u1), (U.points[3:], u2)], R=2)
    want = np.zeros((6, 6))
    want[:3, :3] = u1.entries
    want[3:, 3:] = u2.entries
    np.testing.assert_array_equal(v.entries, want)


def test_glue_fuses_near_blocks():
    spaces_ = [path_space(2, "a"), path_space(2, "b"), path_space(3, "c")]
    U = disjoint_union(spaces_, [0, 1, 30])
    us = [ball_kernel(S, 1) for S in spaces_]
    blocks = [(U.points[0:2], us[0]), (U.points[2:4], us[1]), (U.points[4:], us[2])]
    v = glue_local_kernel(U, blocks, R=2)
    assert fused_blocks(U, [[0, 1], [2, 3], [4, 5, 6]], 2) == [0, 1]
    np.testing.assert_array_equal(v.entries[:4, :4], np.ones((4, 4)))
    np.testing.assert_array_equal(v.entries[4:, 4:], us[2].entries)
    assert not v.entries[:4, 4:].any()
    assert np.linalg.eigvalsh(v.entries)[0] >= -1e-12


def test_glue_errors():
    X = path_space(4)
    u = Kernel(np.eye(2))
    with pytest.raises(ConstructionError, match="disjoint"):
        glue_local_kernel(X, [(["p0", "p1"], u), (["p1", "p2"], u)], 1)
    with pytest.raises(ConstructionError, match="cover"):
        glue_local_kernel(X, [(["p0", "p1"], u)], 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 3))
def test_glue_psd_with_variation(seed, nblocks, R):
    rng = np.random.default_rng(seed)
    parts = [random_space(rng, int(rng.integers(1, 6)), max_dist=3, prefix=f"b{k}_") for k in range(nblocks)]
    positions = np.cumsum(rng.integers(1, 3 * R + 3, nblocks)).tolist()
    U = disjoint_union(parts, positions)
    S = 2 * R + 2
    us = [ball_kernel(P, S) for P in parts]
    eps = max(max(1 - u.entries[P.dist <= R].min(initial=1) for u, P in zip(us, parts)), 0) + 1e-9
    off = np.cumsum([0] + [P.n for P in parts])
    blocks = [(U.points[off[k]:off[k + 1]], us[k]) for k in range(nblocks)]
    v = glue_local_kernel(U, blocks, R)
    assert positive_type_check(v).least_eigenvalue >= -1e-9
    assert variation_check(v, R, eps)
