"""Explicit constructions: telescope graphs, the bounded-degree graph union,
Morita interleaving, limit embeddings and local kernel gluing."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .mspace import FiniteMetricSpace, control_functions, graph_metric, resolve_map
from .roe import Kernel, KernelError, propagation


class ConstructionError(ValueError):
    pass


def disjoint_union(spaces: Sequence[FiniteMetricSpace], positions: Sequence[int], ids=None) -> FiniteMetricSpace:
    """Hang each space from its first point on a line at the given positions.

    d((a, x), (b, y)) = d_a(x, o_a) + |p_a - p_b| + d_b(o_b, y) for a != b,
    which is the path metric of the resulting tree of blocks.
    """
    if len(spaces) != len(positions):
        raise ConstructionError("one position per space")
    if len(set(positions)) != len(positions):
        raise ConstructionError("positions must be distinct")
    sizes = [X.n for X in spaces]
    off = np.concatenate([[0], np.cumsum(sizes)])
    n = int(off[-1])
    D = np.zeros((n, n), dtype=np.int64)
    ecc = [X.dist[0] for X in spaces]
    for a, Xa in enumerate(spaces):
        sa = slice(off[a], off[a + 1])
        D[sa, sa] = Xa.dist
        for b in range(a + 1, len(spaces)):
            sb = slice(off[b], off[b + 1])
            block = ecc[a][:, None] + abs(positions[a] - positions[b]) + ecc[b][None, :]
            D[sa, sb] = block
            D[sb, sa] = block.T
    if ids is None:
        ids = [f"{p}@{a}" for a, X in enumerate(spaces) for p in X.points]
    return FiniteMetricSpace(ids, D, check=False)


# -- telescope ---------------------------------------------------------------


@dataclass
class TelescopeGraph:
    vertices: list[tuple[int, int, int]]
    edges: list[tuple[int, int]]
    embedding: np.ndarray
    i_max: int

    @property
    def index(self) -> dict:
        return {v: k for k, v in enumerate(self.vertices)}

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.vertices), dtype=np.int64)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def adjacency(self) -> csr_matrix:
        m = len(self.vertices)
        if not self.edges:
            return csr_matrix((m, m))
        e = np.array(self.edges)
        data = np.ones(2 * len(e))
        return csr_matrix((data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(m, m))

    def base_distances(self) -> np.ndarray:
        """d_Gamma(phi x, phi y) for all point pairs, by breadth-first search."""
        D = shortest_path(self.adjacency(), unweighted=True, directed=False, indices=self.embedding)
        return D[:, self.embedding]

    def to_document(self) -> dict:
        return {"vertices": [list(v) for v in self.vertices], "edges": [list(e) for e in self.edges]}


def telescope_graph(X: FiniteMetricSpace, i_max: int) -> TelescopeGraph:
    """Levels i = 0..i_max of the telescope over X.

    Each b_{i,x} is a path through (i, x, y), d(x, y) <= i, starting at (i, x, x)
    and then by ascending index of y.  Cross edges join (i, x, y) and (i, y, x);
    telescope edges join (i, x, x) and (i + 1, x, x).
    """
    if i_max < 0:
        raise ConstructionError("i_max must be >= 0")
    n = X.n
    vertices: list[tuple[int, int, int]] = []
    edges: list[tuple[int, int]] = []
    index: dict = {}
    for i in range(i_max + 1):
        for x in range(n):
            ys = [x] + [y for y in range(n) if y != x and X.dist[x, y] <= i]
            prev = None
            for y in ys:
                index[(i, x, y)] = len(vertices)
                vertices.append((i, x, y))
                if prev is not None:
                    edges.append((prev, index[(i, x, y)]))
                prev = index[(i, x, y)]
        for x in range(n):
            for y in range(x + 1, n):
                if X.dist[x, y] <= i:
                    edges.append((index[(i, x, y)], index[(i, y, x)]))
        if i:
            for x in range(n):
                edges.append((index[(i - 1, x, x)], index[(i, x, x)]))
    embedding = np.array([index[(0, x, x)] for x in range(n)], dtype=np.int64)
    return TelescopeGraph(vertices, edges, embedding, i_max)


@dataclass
class TelescopeReport:
    R: int
    i: int
    N: int
    forward_bound: int
    backward_bound: float
    forward_ok: bool
    backward_ok: bool
    max_degree: int
    degree_ok: bool
    forward_max: float
    backward_max: int
    counterexamples: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.forward_ok and self.backward_ok and self.degree_ok


def telescope_check(X: FiniteMetricSpace, G: TelescopeGraph, R: int, i: int | None = None) -> TelescopeReport:
    """Exhaustive forward (2i + 2N - 1) and backward (R^2 / 2) distortion bounds."""
    i = R + 1 if i is None else i
    if G.i_max <= R:
        raise ConstructionError(f"truncation too shallow: i_max={G.i_max} <= R={R}")
    if not R < i <= G.i_max:
        raise ConstructionError(f"need R < i <= i_max, got i={i}")
    N = X.max_ball_size(i) if X.n else 0
    fwd = 2 * i + 2 * N - 1
    bwd = R * R / 2
    DG = G.base_distances()
    near = X.dist <= R
    short = DG <= R
    bad_f = np.argwhere(near & (DG > fwd))
    bad_b = np.argwhere(short & (X.dist > bwd))
    deg = G.degrees()
    cex = {}
    if len(bad_f):
        cex["forward"] = tuple(int(v) for v in bad_f[0])
    if len(bad_b):
        cex["backward"] = tuple(int(v) for v in bad_b[0])
    if deg.size and deg.max() > 3:
        cex["degree"] = G.vertices[int(np.argmax(deg))]
    return TelescopeReport(
        R=R, i=i, N=N, forward_bound=fwd, backward_bound=bwd,
        forward_ok=not len(bad_f), backward_ok=not len(bad_b),
        max_degree=int(deg.max(initial=0)), degree_ok=bool(deg.max(initial=0) <= 3),
        forward_max=float(DG[near].max(initial=0)), backward_max=int(X.dist[short].max(initial=0)),
        counterexamples=cex,
    )


# -- bounded degree graphs ---------------------------------------------------


@lru_cache(maxsize=None)
def _perms(k: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(k))), dtype=np.int64).reshape(-1, k)


def canonical_form(A: np.ndarray) -> tuple[int, int, np.ndarray]:
    """(k, code, canonical adjacency): the minimal upper-triangle bit code over all relabellings."""
    k = A.shape[0]
    P = _perms(k)
    iu = np.triu_indices(k, 1)
    bits = A[P[:, :, None], P[:, None, :]][:, iu[0], iu[1]].astype(np.int64)
    weights = np.left_shift(1, np.arange(bits.shape[1], dtype=np.int64))[::-1]
    codes = bits @ weights
    j = int(np.argmin(codes))
    p = P[j]
    return k, int(codes[j]), A[np.ix_(p, p)]


def bounded_degree_graphs(n_max: int, max_degree: int = 3) -> list[np.ndarray]:
    """One adjacency matrix per isomorphism class of connected graphs, ordered by (size, code).

    Every connected graph arises from a smaller connected one by adding a vertex
    joined to a non-empty set of old vertices (delete a non-cut vertex), so the
    classes are grown level by level.
    """
    if n_max > 7:
        raise ConstructionError(f"n_max={n_max} exceeds the enumeration cap of 7")
    if n_max < 1:
        return []
    level = {(1, 0): np.zeros((1, 1), dtype=np.int64)}
    out = dict(level)
    for k in range(1, n_max):
        nxt: dict = {}
        for A in level.values():
            deg = A.sum(axis=1)
            free = [v for v in range(k) if deg[v] < max_degree]
            for r in range(1, min(max_degree, len(free)) + 1):
                for S in itertools.combinations(free, r):
                    B = np.zeros((k + 1, k + 1), dtype=np.int64)
                    B[:k, :k] = A
                    B[k, list(S)] = B[list(S), k] = 1
                    kk, code, C = canonical_form(B)
                    nxt.setdefault((kk, code), C)
        level = nxt
        out.update(level)
    return [out[key] for key in sorted(out)]


def gamma_u(n_max: int, max_degree: int = 3) -> FiniteMetricSpace:
    """Union of all connected graphs up to n_max vertices and degree <= 3, component k at offset k^2."""
    comps = bounded_degree_graphs(n_max, max_degree)
    spaces = []
    for c, A in enumerate(comps, start=1):
        k = A.shape[0]
        edges = [tuple(e) for e in np.argwhere(np.triu(A, 1))]
        D = graph_metric(k, edges)
        spaces.append(FiniteMetricSpace([f"g{c}v{v}" for v in range(k)], D, check=False))
    if not spaces:
        return FiniteMetricSpace([], np.zeros((0, 0), dtype=np.int64))
    ids = [p for X in spaces for p in X.points]
    return disjoint_union(spaces, [c * c for c in range(1, len(spaces) + 1)], ids)


# -- Morita interleaving ------------------------------------------------------


@dataclass
class Interleaving:
    N: np.ndarray
    pi: np.ndarray
    J: int
    mapping: dict
    injective: bool
    image_ok: bool
    ranges: dict


def _fibers(f: np.ndarray, m: int):
    if len(np.unique(f)) != m or (f < 0).any() or (f >= m).any():
        missing = sorted(set(range(m)) - set(f.tolist()))
        raise ConstructionError(f"f is not surjective: missed {missing[:5]}")
    N = np.bincount(f, minlength=m)
    pi = np.zeros(len(f), dtype=np.int64)
    seen = np.zeros(m, dtype=np.int64)
    for x, y in enumerate(f):
        seen[y] += 1
        pi[x] = seen[y]
    return N, pi


def morita_interleave(f, X: FiniteMetricSpace, Y: FiniteMetricSpace, J: int) -> Interleaving:
    """(x, j) -> (f(x), pi(x) + j N(f(x))) for |j| <= J, pi counting each fibre upwards from 1."""
    f = resolve_map(f, X, Y)
    N, pi = _fibers(f, Y.n)
    mapping = {}
    for x in range(X.n):
        for j in range(-J, J + 1):
            mapping[(x, j)] = (int(f[x]), int(pi[x] + j * N[f[x]]))
    image = set(mapping.values())
    injective = len(image) == len(mapping)
    ranges = {y: (int(1 - J * N[y]), int(N[y] * (J + 1))) for y in range(Y.n)}
    expected = {(y, k) for y, (lo, hi) in ranges.items() for k in range(lo, hi + 1)}
    residues = all((k - pi[x]) % N[f[x]] == 0 for (x, _), (_, k) in mapping.items())
    return Interleaving(N, pi, J, mapping, injective, image == expected and residues, ranges)


@dataclass
class ConjugationReport:
    indices: tuple
    block: np.ndarray
    conjugate: np.ndarray
    propagation: int
    bound: int
    tight_bound: int
    ok: bool


def morita_conjugation_check(f, X: FiniteMetricSpace, Y: FiniteMetricSpace, T: Kernel, indices) -> ConjugationReport:
    """V_i P_{n,i} T P_{n',i'} V_{i'}^* on Y against forward(prop T) + 2 max fibre radius."""
    n_, i, n2, i2 = (int(v) for v in indices)
    if not (1 <= i <= n_ and 1 <= i2 <= n2):
        raise ConstructionError(f"invalid indices {indices}: need 1 <= i <= n")
    f = resolve_map(f, X, Y)
    N, pi = _fibers(f, Y.n)
    A = T.entries
    rows = np.flatnonzero((N[f] == n_) & (pi == i))
    cols = np.flatnonzero((N[f] == n2) & (pi == i2))
    P = np.zeros(X.n, bool)
    P[rows] = True
    Q = np.zeros(X.n, bool)
    Q[cols] = True
    block = np.where(P[:, None] & Q[None, :], A, 0)
    C = np.zeros((Y.n, Y.n), dtype=A.dtype)
    C[np.ix_(f[rows], f[cols])] = A[np.ix_(rows, cols)]
    prop = propagation(Kernel(C, Y, T.tol))
    ctrl = control_functions(f, X, Y)
    rho = 0
    for y in range(Y.n):
        fib = np.flatnonzero(f == y)
        rho = max(rho, int(Y.dist[y, f[fib]].max(initial=0)))
    tight = ctrl.forward(propagation(T, X))
    bound = tight + 2 * rho
    return ConjugationReport(tuple(indices), block, C, prop, bound, tight, prop <= bound)


# -- limit embedding ----------------------------------------------------------


class NonStabilizingPair(ConstructionError):
    def __init__(self, pair, values):
        super().__init__(f"pair {pair} does not stabilise: {values}")
        self.pair = pair
        self.values = values


@dataclass
class LimitEmbedding:
    points: list[str]
    g: np.ndarray
    psi: np.ndarray
    base: str
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def limit_embedding(family: Sequence[Mapping[str, int]], G, tail: int = 2) -> LimitEmbedding:
    """Stabilised g_xy = phi_i(x)^-1 phi_i(y) over a nested family of maps into G.

    A pair counts as stable when its last ``tail`` observations agree.
    """
    if not family:
        raise ConstructionError("empty family")
    doms = [list(m) for m in family]
    for a, b in zip(doms, doms[1:]):
        if not set(a) <= set(b):
            raise ConstructionError("domains are not nested")
    points = doms[-1]
    idx = {p: k for k, p in enumerate(points)}
    n = len(points)
    inv, T = G.inverse, G.table
    g = np.full((n, n), -1, dtype=np.int64)
    for x, y in itertools.product(points, repeat=2):
        vals = [int(T[inv[m[x]], m[y]]) for m in family if x in m and y in m]
        last = vals[-min(tail, len(vals)):]
        if len(set(last)) != 1:
            raise NonStabilizingPair((x, y), vals)
        g[idx[x], idx[y]] = last[-1]
    base = doms[0][0]
    psi = g[idx[base]].copy()
    e = G.identity
    ar = np.arange(n)
    L = G.lengths
    checks = {
        "unit": bool((g[ar, ar] == e).all()),
        "inverse": bool((g.T == inv[g]).all()),
        "cocycle": bool((T[g[:, :, None], g[None, :, :]] == g[:, None, :]).all()),
        "isometric": bool((L[T[inv[psi][:, None], psi[None, :]]] == L[g]).all()),
    }
    return LimitEmbedding(points, g, psi, base, checks)


# -- gluing -------------------------------------------------------------------


def fused_blocks(union: FiniteMetricSpace, blocks: Sequence[Sequence[int]], R: int) -> list[int]:
    """Blocks within distance R of some other block."""
    out = []
    for a, A in enumerate(blocks):
        for b, B in enumerate(blocks):
            if a != b and union.dist[np.ix_(A, B)].min() <= R:
                out.append(a)
                break
    return out


def glue_local_kernel(union: FiniteMetricSpace, blocks, R: int) -> Kernel:
    """All-ones on the union of blocks that come within R of another block, u_i on the rest, 0 between."""
    idx_blocks, kernels = [], []
    for members, u in blocks:
        idx = [union.resolve(p) for p in members]
        u = u if isinstance(u, Kernel) else Kernel(u)
        if u.n != len(idx):
            raise KernelError(f"block kernel is {u.n}x{u.n} for {len(idx)} points")
        idx_blocks.append(idx)
        kernels.append(u)
    flat = [p for b in idx_blocks for p in b]
    if len(set(flat)) != len(flat):
        raise ConstructionError("blocks are not disjoint")
    if sorted(flat) != list(range(union.n)):
        raise ConstructionError("blocks do not cover the union")
    fused = fused_blocks(union, idx_blocks, R)
    dtype = np.result_type(*(u.entries.dtype for u in kernels)) if kernels else float
    v = np.zeros((union.n, union.n), dtype=dtype)
    I = [p for a in fused for p in idx_blocks[a]]
    v[np.ix_(I, I)] = 1
    for a, (idx, u) in enumerate(zip(idx_blocks, kernels)):
        if a not in fused:
            v[np.ix_(idx, idx)] = u.entries
    return Kernel(v, union, max((u.tol for u in kernels), default=1e-9))
