import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarsekit import (
    Chart,
    FiniteMetricSpace,
    KappaCapExceeded,
    KappaCaps,
    PartialBijection,
    build_atlas_coloring,
    check_cotranslation,
    kappa_search,
    path_space,
    random_space,
    verify_chart,
)
from coarsekit.kappa import min_k_for_cover

from conftest import closure, spaces


def all_partial_bijections(n):
    out = []
    for k in range(1, n + 1):
        for xs in itertools.combinations(range(n), k):
            for ys in itertools.permutations(range(n), k):
                out.append(PartialBijection(zip(xs, ys)))
    return out


def brute_min_k(cover, n):
    """Iterative deepening over systems of whole cotranslations; no cell reduction."""
    cands = [s for s in all_partial_bijections(n) if check_cotranslation(s, cover)]
    reqs = sorted({(x, x2, y, y2) for t in cover for x, y in t for x2, y2 in t})
    if not all(any(s(x) == x2 and s(y) == y2 for s in cands) for x, x2, y, y2 in reqs):
        return math.inf
    for k in range(1, len(cands) + 1):
        mult = np.zeros((n, n), dtype=int)
        chosen = []

        def dfs(i):
            if i == len(reqs):
                return True
            x, x2, y, y2 = reqs[i]
            if any(s(x) == x2 and s(y) == y2 for s in chosen):
                return dfs(i + 1)
            for s in cands:
                if s(x) == x2 and s(y) == y2 and s not in chosen:
                    M = np.zeros((n, n), dtype=int)
                    for a, b in s:
                        M[a, b] = 1
                    if (mult + M > k).any():
                        continue
                    mult[:] += M
                    chosen.append(s)
                    if dfs(i + 1):
                        return True
                    chosen.pop()
                    mult[:] -= M
            return False

        if dfs(0):
            return k
    return math.inf


def covers(n, must, pairs):
    """Every partition into partial bijections of a superset of ``must`` inside ``pairs``."""
    optional = [p for p in pairs if p not in must]
    for r in range(len(optional) + 1):
        for extra in itertools.combinations(optional, r):
            items = sorted(must) + list(extra)
            blocks = []

            def rec(i):
                if i == len(items):
                    yield [PartialBijection(b) for b in blocks]
                    return
                a, b = items[i]
                for blk in blocks:
                    if all(a != u and b != v for u, v in blk):
                        blk.append((a, b))
                        yield from rec(i + 1)
                        blk.pop()
                blocks.append([(a, b)])
                yield from rec(i + 1)
                blocks.pop()

            yield from rec(0)


def brute_kappa(X, R):
    n = X.n
    pairs = [(a, b) for a in range(n) for b in range(n)]
    must = {(a, b) for a, b in pairs if X.dist[a, b] < R}
    return min(brute_min_k(c, n) for c in covers(n, must, pairs))


def test_two_point_exact(two_point):
    r = kappa_search(two_point, 2)
    assert r.exact and r.value == 1 and (r.lower, r.upper) == (1, 1)
    assert brute_kappa(two_point, 2) == 1


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("R", [1, 2, 3, 4])
def test_two_point_brute(d, R):
    X = FiniteMetricSpace(["a", "b"], [[0, d], [d, 0]])
    assert kappa_search(X, R).value == brute_kappa(X, R) == 1


@pytest.mark.parametrize("D", [[[0, 1, 2], [1, 0, 1], [2, 1, 0]], [[0, 1, 1], [1, 0, 1], [1, 1, 0]]])
@pytest.mark.parametrize("R", [2, 3])
def test_three_point_brute(D, R):
    X = FiniteMetricSpace(["a", "b", "c"], D)
    assert kappa_search(X, R).value == brute_kappa(X, R)


@st.composite
def partition_covers(draw, X, R):
    items = [tuple(map(int, p)) for p in np.argwhere(X.dist < R)]
    blocks = []
    for a, b in draw(st.permutations(items)):
        options = [i for i, blk in enumerate(blocks) if all(a != u and b != v for u, v in blk)]
        i = draw(st.sampled_from(options + [len(blocks)]))
        if i == len(blocks):
            blocks.append([])
        blocks[i].append((a, b))
    return [PartialBijection(b) for b in blocks]


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_min_k_matches_brute(data):
    X = data.draw(spaces(min_n=2, max_n=3, max_w=3))
    R = data.draw(st.integers(1, 5))
    cover = data.draw(partition_covers(X, R))
    k, sigmas = min_k_for_cover(cover, X.n)
    assert k == brute_min_k(cover, X.n)
    if k == math.inf:
        return
    rep = verify_chart(X, Chart(R, cover, sigmas))
    assert rep.axiom3 and rep.cotranslations_ok and rep.k == k


@settings(max_examples=40, deadline=None)
@given(spaces(max_n=5, max_w=5), st.integers(1, 6))
def test_witness_verifies_and_is_minimal(X, R):
    r = kappa_search(X, R)
    rep = verify_chart(X, r.witness)
    assert rep.ok and rep.k == r.value == 1
    coloring = verify_chart(X, build_atlas_coloring(X, [R])[R])
    assert r.value <= coloring.k


def test_caps():
    X = path_space(7)
    with pytest.raises(KappaCapExceeded):
        kappa_search(X, 2)
    with pytest.raises(KappaCapExceeded):
        kappa_search(path_space(6), 6, KappaCaps(max_nodes=5))
    with pytest.raises(ValueError):
        kappa_search(X, 0)


def test_bound_mode_forty_points():
    X = random_space(np.random.default_rng(40), 40)
    r = kappa_search(X, 3, mode="bound")
    assert (r.lower, r.upper) == (1, 1)
    assert verify_chart(X, r.witness).ok


def test_cover_needing_two():
    # a 4-point cover whose transitivity demands force some x -> x' into two cotranslations
    cover = [
        PartialBijection([(0, 1), (2, 3), (3, 0)]),
        PartialBijection.identity(range(4)),
        PartialBijection([(0, 3), (1, 0), (3, 2)]),
        PartialBijection([(2, 0)]),
        PartialBijection([(0, 2)]),
    ]
    k, sigmas = min_k_for_cover(cover, 4)
    assert k == brute_min_k(cover, 4) == 2
    X = FiniteMetricSpace([f"q{i}" for i in range(4)], np.ones((4, 4), dtype=int) - np.eye(4, dtype=int))
    rep = verify_chart(X, Chart(2, cover, sigmas))
    assert rep.axiom3 and rep.cotranslations_ok and rep.k == 2


def test_infeasible_cover():
    # (0,0) and (1,2) share a translation, so sigma 0->1, 1->2 sends (0,0) to (1,1), owned elsewhere
    cover = [
        PartialBijection([(0, 0), (1, 2), (2, 1)]),
        PartialBijection([(1, 1), (2, 2)]),
        PartialBijection([(0, 1), (1, 0)]),
        PartialBijection([(0, 2), (2, 0)]),
    ]
    assert min_k_for_cover(cover, 3) == (math.inf, None)
    assert brute_min_k(cover, 3) == math.inf
