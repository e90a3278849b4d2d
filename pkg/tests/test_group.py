import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarsekit import (
    GroupError,
    canonical_atlas,
    cyclic_group,
    dihedral_group,
    direct_product,
    group_from_table,
    symmetric_group,
    verify_atlas,
    word_metric,
)
from coarsekit.group import FiniteGroup, translation_of


def z_table(n):
    return [[(a + b) % n for b in range(n)] for a in range(n)]


def test_z5_from_table():
    G = group_from_table({"elements": [str(i) for i in range(5)], "table": z_table(5), "generators": [1, 4]})
    assert G.order == 5 and G.identity == 0
    assert list(G.inverse) == [0, 4, 3, 2, 1]


def test_repeated_row():
    T = z_table(3)
    T[1] = [1, 1, 2]
    with pytest.raises(GroupError, match="not a bijection row"):
        group_from_table({"elements": ["0", "1", "2"], "table": T, "generators": [1, 2]})


def test_z4_generator_two():
    with pytest.raises(GroupError, match="generators do not generate"):
        group_from_table({"elements": list("0123"), "table": z_table(4), "generators": [2]})


def test_non_associative():
    # a latin square with identity 0 that is not a group (order 5 loop)
    T = [
        [0, 1, 2, 3, 4],
        [1, 0, 3, 4, 2],
        [2, 4, 0, 1, 3],
        [3, 2, 4, 0, 1],
        [4, 3, 1, 2, 0],
    ]
    with pytest.raises(GroupError, match="not associative"):
        group_from_table({"elements": list("abcde"), "table": T, "generators": [1, 2, 3, 4]})


@pytest.mark.parametrize(
    "gens,msg", [([0, 1, 4], "identity"), ([1], "closed under inverses")]
)
def test_generator_rules(gens, msg):
    with pytest.raises(GroupError, match=msg):
        group_from_table({"elements": list("01234"), "table": z_table(5), "generators": gens})


def test_schema():
    with pytest.raises(GroupError, match="schema violation"):
        group_from_table({"elements": ["0"], "table": [[0]]})


def bfs_word_length(G, g):
    # oracle: shortest word by iterated products of generators
    frontier, seen, k = {G.identity}, {G.identity}, 0
    while g not in frontier:
        frontier = {int(G.table[h, s]) for h in frontier for s in G.generators} - seen
        seen |= frontier
        k += 1
    return k


def test_z5_metric():
    M = word_metric(cyclic_group(5))
    assert M.d("0", "2") == 2
    assert M.d("1", "4") == 2
    assert all(M.d(g, g) == 0 for g in M.points)


@pytest.mark.parametrize(
    "G", [cyclic_group(7), dihedral_group(4), dihedral_group(5), symmetric_group(3), symmetric_group(4),
          direct_product(cyclic_group(2), cyclic_group(3))],
    ids=["z7", "d4", "d5", "s3", "s4", "z2xz3"],
)
def test_standard_groups(G):
    G2 = FiniteGroup(G.elements, G.table, G.generators)  # full validation
    D = word_metric(G2).dist
    T = G.table
    assert (D[T[:, :, None], T[:, None, :]] == D[None]).all()  # left invariance
    for g in range(G.order):
        assert D[G.identity, g] == bfs_word_length(G, g)


def test_dihedral_order():
    G = dihedral_group(6)
    assert G.order == 12
    r, s = 1, 6
    assert G.mul(s, s) == G.identity
    # s r s^-1 = r^-1
    assert G.mul(G.mul(s, r), int(G.inverse[s])) == int(G.inverse[r])


def test_canonical_z5():
    G = cyclic_group(5)
    A = canonical_atlas(G, [1, 2])
    ts = A[2].translations
    assert set(ts) == {translation_of(G, g) for g in (0, 1, 4)} and len(ts) == 3
    assert all(len(t) == 5 for t in ts)
    assert A[1].translations == (translation_of(G, 0),)
    rep = verify_atlas(G.metric, A)
    assert rep.ok and rep.free and rep.globally_controlled
    assert rep[2].k == 1


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 14), st.integers(1, 8))
def test_canonical_cyclic_property(n, R):
    G = cyclic_group(n)
    rep = verify_atlas(G.metric, canonical_atlas(G, [R]))
    assert rep.ok and rep.free and rep.globally_controlled
