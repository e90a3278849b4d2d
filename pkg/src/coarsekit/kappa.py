"""Search for the translation invariant kappa_X(R) on small finite spaces.

Only the strict R-neighbourhood N of the diagonal matters to the axioms, and
shrinking a translation to its pairs inside N never invalidates a chart, so
covers are enumerated as partitions of N into partial bijections.  For a fixed
cover an optimal cotranslation system may be taken to consist of unions of
"requirement cells" (x -> x', y -> y') demanded by transitivity, one group per
cotranslation.  k = 1 is the floor (the diagonal forces some sigma with
sigma x = x), and k = 1 is feasible for a cover exactly when the connected
components of shared cells are themselves cotranslations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mspace import FiniteMetricSpace
from .ptrans import Chart, PartialBijection, multiplicity, pullback_chart, verify_chart


class KappaCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class KappaCaps:
    exact_size: int = 6
    max_covers: int = 200_000
    max_nodes: int = 2_000_000


@dataclass
class KappaResult:
    R: int
    lower: int
    upper: float
    exact: bool
    witness: Chart | None = None
    nodes: int = 0

    @property
    def value(self):
        return self.lower if self.exact else None


class _Budget:
    def __init__(self, caps: KappaCaps):
        self.caps = caps
        self.nodes = 0
        self.covers = 0

    def node(self):
        self.nodes += 1
        if self.nodes > self.caps.max_nodes:
            raise KappaCapExceeded(f"node cap {self.caps.max_nodes} exceeded")

    def cover(self):
        self.covers += 1
        if self.covers > self.caps.max_covers:
            raise KappaCapExceeded(f"cover cap {self.caps.max_covers} exceeded")


def _requirements(blocks: Sequence[Sequence[tuple[int, int]]], n: int) -> list[tuple[int, ...]]:
    """Cell sets (codes x*n + x') that transitivity forces onto a single cotranslation."""
    reqs = set()
    for t in blocks:
        for x, y in t:
            for x2, y2 in t:
                reqs.add(tuple(sorted({x * n + x2, y * n + y2})))
    return sorted(reqs)


def _as_map(cells, n: int):
    """Partial map from a set of cells, or None if it is not a partial bijection."""
    fwd: dict[int, int] = {}
    bwd: dict[int, int] = {}
    for c in cells:
        a, b = divmod(c, n)
        if fwd.get(a, b) != b or bwd.get(b, a) != a:
            return None
        fwd[a] = b
        bwd[b] = a
    return fwd


def _violates(fwd: dict[int, int], owner: np.ndarray, in_nbhd: np.ndarray) -> bool:
    """Permanent cotranslation violation of the partial map fwd against the (partial) cover.

    owner[a, b] is the block of an assigned pair, -1 otherwise.  A pair whose image
    is not yet assigned but lies in the neighbourhood is still pending.
    """
    dom = list(fwd)
    for a in dom:
        sa = fwd[a]
        for b in dom:
            t = owner[a, b]
            if t < 0:
                continue
            sb = fwd[b]
            t2 = owner[sa, sb]
            if t2 >= 0:
                if t2 != t:
                    return True
            elif not in_nbhd[sa, sb]:
                return True
    return False


def free_components(blocks, n: int, owner: np.ndarray, in_nbhd: np.ndarray):
    """Cotranslations of a k = 1 system for the (partial) cover, or None if none can exist."""
    parent: dict[int, int] = {}

    def find(c):
        while parent.setdefault(c, c) != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for req in _requirements(blocks, n):
        r0 = find(req[0])
        for c in req[1:]:
            rc = find(c)
            if rc != r0:
                parent[rc] = r0
    comps: dict[int, list[int]] = {}
    for c in list(parent):
        comps.setdefault(find(c), []).append(c)
    maps = []
    for cells in sorted(comps.values(), key=min):
        fwd = _as_map(cells, n)
        if fwd is None or _violates(fwd, owner, in_nbhd):
            return None
        maps.append(fwd)
    return maps


def min_k_for_cover(
    translations: Sequence[PartialBijection],
    n: int,
    upper: float = math.inf,
    budget: _Budget | None = None,
):
    """Smallest k over cotranslation systems satisfying transitivity for a fixed cover.

    Branch and bound over assignments of requirement cell sets to cotranslations.
    Returns (k, sigmas) with k < upper, or (inf, None) if no such system exists.
    """
    budget = budget or _Budget(KappaCaps())
    blocks = [sorted(t.pairs) for t in translations]
    owner = np.full((n, n), -1, dtype=np.int64)
    for ti, t in enumerate(blocks):
        for a, b in t:
            owner[a, b] = ti
    in_nbhd = owner >= 0
    reqs = _requirements(blocks, n)
    reqs.sort(key=lambda r: -len(r))
    mult = np.zeros(n * n, dtype=np.int64)
    groups: list[set[int]] = []
    best = [upper, None]

    def admissible(cells: set[int]) -> bool:
        fwd = _as_map(cells, n)
        return fwd is not None and not _violates(fwd, owner, in_nbhd)

    def dfs(i: int, kcur: int):
        budget.node()
        if kcur >= best[0]:
            return
        if i == len(reqs):
            best[0] = kcur
            best[1] = [set(g) for g in groups]
            return
        req = reqs[i]
        if any(all(c in g for c in req) for g in groups):
            # already satisfied at no cost: this branch dominates every other
            dfs(i + 1, kcur)
            return
        for g in groups:
            new = [c for c in req if c not in g]
            g.update(new)
            if admissible(g):
                mult[new] += 1
                dfs(i + 1, max(kcur, int(mult[new].max())))
                mult[new] -= 1
            g.difference_update(new)
        g = set(req)
        if admissible(g):
            groups.append(g)
            mult[list(req)] += 1
            dfs(i + 1, max(kcur, int(mult[list(req)].max())))
            mult[list(req)] -= 1
            groups.pop()

    dfs(0, 0 if not reqs else 1)
    if best[1] is None:
        return math.inf, None
    sigmas = [PartialBijection.from_map(_as_map(g, n)) for g in best[1]]
    return best[0], sigmas


def _partitions(items, n, budget, prune=None):
    """Partitions of items into partial bijections, restricted-growth order.

    ``prune(blocks, owner)`` is consulted after each assignment; returning True
    cuts the subtree.
    """
    blocks: list[list[tuple[int, int]]] = []
    firsts: list[set[int]] = []
    seconds: list[set[int]] = []
    owner = np.full((n, n), -1, dtype=np.int64)

    def rec(i):
        budget.node()
        if i == len(items):
            budget.cover()
            yield [list(b) for b in blocks]
            return
        a, b = items[i]
        for bi in range(len(blocks) + 1):
            if bi == len(blocks):
                blocks.append([])
                firsts.append(set())
                seconds.append(set())
            elif a in firsts[bi] or b in seconds[bi]:
                continue
            blocks[bi].append((a, b))
            firsts[bi].add(a)
            seconds[bi].add(b)
            owner[a, b] = bi
            if prune is None or not prune(blocks, owner):
                yield from rec(i + 1)
            owner[a, b] = -1
            blocks[bi].pop()
            firsts[bi].discard(a)
            seconds[bi].discard(b)
            if not blocks[bi]:
                blocks.pop()
                firsts.pop()
                seconds.pop()

    yield from rec(0)


_cache: dict = {}


def _exact(n: int, R: int, nbhd: np.ndarray, caps: KappaCaps) -> KappaResult:
    key = (n, R, nbhd.tobytes(), caps)
    if key in _cache:
        return _cache[key]
    items = [tuple(int(v) for v in p) for p in np.argwhere(nbhd)]
    budget = _Budget(caps)
    result = None

    def prune(blocks, owner):
        return free_components(blocks, n, owner, nbhd) is None

    for blocks in _partitions(items, n, budget, prune):
        owner = np.full((n, n), -1, dtype=np.int64)
        for bi, b in enumerate(blocks):
            for a, c in b:
                owner[a, c] = bi
        maps = free_components(blocks, n, owner, nbhd)
        if maps is not None:
            ts = [PartialBijection(b) for b in blocks]
            sig = [PartialBijection.from_map(m) for m in maps]
            result = KappaResult(R, 1, 1, True, Chart(R, ts, sig, meta={"method": "kappa-exact"}))
            break
    if result is None:
        # no k = 1 system for any cover: branch and bound over all covers
        best, witness = math.inf, None
        for blocks in _partitions(items, n, budget):
            ts = [PartialBijection(b) for b in blocks]
            k, sig = min_k_for_cover(ts, n, best, budget)
            if k < best:
                best, witness = k, Chart(R, ts, sig, meta={"method": "kappa-exact"})
                if best == 2:
                    break
        result = KappaResult(R, int(best) if best < math.inf else 0, best, True, witness)
    result.nodes = budget.nodes
    _cache[key] = result
    return result


def kappa_search(
    X: FiniteMetricSpace, R: int, caps: KappaCaps | None = None, mode: str = "exact"
) -> KappaResult:
    """kappa_X(R): exact minimisation over all charts, or pullback bounds.

    ``mode="bound"`` embeds X injectively into Z_m (m > |X| * diam) via p_i -> i
    and returns (1, k of the verified pullback chart).
    """
    caps = caps or KappaCaps()
    if R <= 0:
        raise ValueError("R must be positive")
    if mode == "exact":
        if X.n > caps.exact_size:
            raise KappaCapExceeded(f"|X|={X.n} exceeds exact_size={caps.exact_size}")
        return _exact(X.n, R, np.asarray(X.dist < R), caps)
    if mode != "bound":
        raise ValueError(f"unknown mode {mode!r}")
    from .group import cyclic_group

    m = X.n * max(X.diameter, 1) + 1
    G = cyclic_group(m)
    f = np.arange(X.n)
    g = G.lengths[G.table[G.inverse[f][:, None], f[None, :]]]
    S = int(g[X.dist <= R].max())
    chart = pullback_chart(X, f, G, S, R)
    rep = verify_chart(X, chart)
    if not rep.ok:
        raise AssertionError(f"pullback chart failed verification: {rep.witnesses}")
    return KappaResult(R, 1 if X.n else 0, rep.k, rep.k == 1, chart)
