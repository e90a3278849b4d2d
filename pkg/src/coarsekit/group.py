"""Finite groups given by multiplication tables, with word metrics."""

from __future__ import annotations

import itertools
import json
from collections import deque
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .mspace import FiniteMetricSpace
from .ptrans import Atlas, Chart, PartialBijection


class GroupError(ValueError):
    pass


class FiniteGroup:
    """Elements ``0..n-1`` with ``table[a, b] = a*b`` and a symmetric generating set."""

    def __init__(self, elements: Sequence[str], table, generators: Iterable[int], *, check: bool = True):
        self.elements = tuple(str(e) for e in elements)
        table = np.array(table, dtype=np.int64, copy=True)
        n = len(self.elements)
        if table.shape != (n, n):
            raise GroupError(f"table has shape {table.shape}, expected {(n, n)}")
        if n and ((table < 0) | (table >= n)).any():
            raise GroupError("table entry out of range")
        table.setflags(write=False)
        self.table = table
        self.generators = tuple(int(g) for g in generators)
        self.identity = self._find_identity(check)
        self.inverse = self._inverses()
        if check:
            self._validate()

    def _find_identity(self, check: bool) -> int:
        n = len(self.elements)
        ar = np.arange(n)
        if check:
            for r in range(n):
                if len(np.unique(self.table[r])) != n:
                    raise GroupError(f"not a bijection row: row {r} repeats an element")
                if len(np.unique(self.table[:, r])) != n:
                    raise GroupError(f"not a bijection column: column {r} repeats an element")
        for e in range(n):
            if np.array_equal(self.table[e], ar) and np.array_equal(self.table[:, e], ar):
                return e
        raise GroupError("no identity element")

    def _inverses(self) -> np.ndarray:
        inv = np.argmax(self.table == self.identity, axis=1)
        inv.setflags(write=False)
        return inv

    def _validate(self) -> None:
        n = self.order
        T, e, inv = self.table, self.identity, self.inverse
        ar = np.arange(n)
        if not ((T[ar, inv] == e).all() and (T[inv, ar] == e).all()):
            raise GroupError("missing two-sided inverse")
        for a in range(n):
            # (a*b)*c == a*(b*c) for all b, c
            if not np.array_equal(T[T[a]], T[a][T]):
                b, c = np.argwhere(T[T[a]] != T[a][T])[0]
                raise GroupError(f"not associative at ({a},{b},{c})")
        gens = set(self.generators)
        if any(not 0 <= g < n for g in gens):
            raise GroupError("generator out of range")
        if e in gens:
            raise GroupError("identity may not be a generator")
        if any(int(inv[g]) not in gens for g in gens):
            raise GroupError("generators are not closed under inverses")
        if (self.lengths < 0).any():
            raise GroupError("generators do not generate the group")

    @property
    def order(self) -> int:
        return len(self.elements)

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    @cached_property
    def lengths(self) -> np.ndarray:
        """Word length of every element (-1 if unreachable) by breadth-first search."""
        n = self.order
        dist = np.full(n, -1, dtype=np.int64)
        dist[self.identity] = 0
        queue = deque([self.identity])
        while queue:
            g = queue.popleft()
            for s in self.generators:
                h = int(self.table[g, s])
                if dist[h] < 0:
                    dist[h] = dist[g] + 1
                    queue.append(h)
        dist.setflags(write=False)
        return dist

    @cached_property
    def metric(self) -> FiniteMetricSpace:
        return word_metric(self)

    def __repr__(self) -> str:
        return f"FiniteGroup(order={self.order}, generators={list(self.generators)})"

    def to_document(self) -> dict:
        return {
            "elements": list(self.elements),
            "table": self.table.tolist(),
            "generators": list(self.generators),
        }


def group_from_table(document) -> FiniteGroup:
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise GroupError(f"schema violation: not JSON ({exc})") from None
    if not isinstance(document, Mapping) or {"elements", "table", "generators"} - set(document):
        raise GroupError("schema violation: need elements, table, generators")
    elements, table, gens = document["elements"], document["table"], document["generators"]
    if not isinstance(elements, list) or not all(isinstance(e, str) for e in elements):
        raise GroupError("schema violation: elements must be a list of strings")
    if not isinstance(table, list) or not all(
        isinstance(r, list) and len(r) == len(elements) and all(isinstance(v, int) for v in r)
        for r in table
    ) or len(table) != len(elements):
        raise GroupError("schema violation: table must be a square integer matrix")
    if not isinstance(gens, list) or not all(isinstance(g, int) for g in gens):
        raise GroupError("schema violation: generators must be integer indices")
    return FiniteGroup(elements, table, gens)


def word_metric(G: FiniteGroup) -> FiniteMetricSpace:
    """Left-invariant word metric d(g, h) = |g^-1 h|."""
    L = G.lengths
    if (L < 0).any():
        raise GroupError("generators do not generate the group")
    D = L[G.table[G.inverse[:, None], np.arange(G.order)[None, :]]]
    return FiniteMetricSpace(G.elements, D, check=False)


def translation_of(G: FiniteGroup, g: int) -> PartialBijection:
    """t_g = {(h, hg)}."""
    return PartialBijection((h, int(G.table[h, g])) for h in range(G.order))


def left_multiplication(G: FiniteGroup, h: int) -> PartialBijection:
    """sigma_h as the graph {(x, hx)}."""
    return PartialBijection((x, int(G.table[h, x])) for x in range(G.order))


def canonical_atlas(G: FiniteGroup, radii: Iterable[int]) -> Atlas:
    sigmas = [left_multiplication(G, h) for h in range(G.order)]
    charts = []
    for R in radii:
        if R <= 0:
            raise ValueError("radii must be positive")
        ts = [translation_of(G, g) for g in range(G.order) if G.lengths[g] < R]
        charts.append(Chart(R, ts, sigmas, meta={"method": "canonical"}))
    return Atlas.from_charts(charts)


# -- standard groups ---------------------------------------------------------


def cyclic_group(n: int) -> FiniteGroup:
    ar = np.arange(n)
    gens = sorted({1 % n, (n - 1) % n} - {0})
    return FiniteGroup([str(i) for i in ar], (ar[:, None] + ar[None, :]) % n, gens, check=False)


def dihedral_group(n: int) -> FiniteGroup:
    """Symmetries of the n-gon, order 2n; elements r^k (k) and s r^k (n + k)."""
    if n < 2:
        raise ValueError("dihedral group needs n >= 2")

    def decode(a):
        return divmod(a, n)  # (reflection bit, rotation)

    T = np.empty((2 * n, 2 * n), dtype=np.int64)
    for a in range(2 * n):
        fa, ka = decode(a)
        for b in range(2 * n):
            fb, kb = decode(b)
            # s^fa r^ka s^fb r^kb = s^(fa+fb) r^((-1)^fb ka + kb)
            k = ((-ka if fb else ka) + kb) % n
            T[a, b] = ((fa + fb) % 2) * n + k
    names = [f"r{k}" for k in range(n)] + [f"sr{k}" for k in range(n)]
    gens = sorted({1, n - 1, n})
    return FiniteGroup(names, T, gens, check=False)


def symmetric_group(k: int) -> FiniteGroup:
    """S_k with adjacent transpositions as generators."""
    perms = list(itertools.permutations(range(k)))
    index = {p: i for i, p in enumerate(perms)}
    T = np.empty((len(perms), len(perms)), dtype=np.int64)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            # (p*q)(x) = p(q(x))
            T[i, j] = index[tuple(p[q[x]] for x in range(k))]
    gens = []
    for a in range(k - 1):
        s = list(range(k))
        s[a], s[a + 1] = s[a + 1], s[a]
        gens.append(index[tuple(s)])
    return FiniteGroup(["".join(map(str, p)) for p in perms], T, gens, check=False)


def direct_product(G: FiniteGroup, H: FiniteGroup) -> FiniteGroup:
    m = H.order
    T = (G.table[:, None, :, None] * m + H.table[None, :, None, :]).reshape(G.order * m, G.order * m)
    names = [f"({a},{b})" for a in G.elements for b in H.elements]
    gens = [g * m + H.identity for g in G.generators] + [G.identity * m + h for h in H.generators]
    return FiniteGroup(names, T, gens, check=False)
