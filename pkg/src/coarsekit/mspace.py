"""Finite uniformly discrete metric spaces.

Distances are exact non-negative integers measured in "units"; ``scale`` says
how many units make up a distance of 1.0.  Every set-valued result over a space
is expressed with integer point indices; point ids only appear at the I/O
boundary and in :meth:`FiniteMetricSpace.resolve`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class MetricError(ValueError):
    """Raised when a document or matrix does not describe a valid space."""


class FiniteMetricSpace:
    """Point list plus a symmetric integer distance matrix."""

    def __init__(self, points: Sequence[str], dist, scale: int = 1, *, check: bool = True):
        points = tuple(str(p) for p in points)
        dist = np.array(dist, dtype=np.int64, copy=True)
        if dist.ndim != 2 or dist.shape != (len(points), len(points)):
            raise MetricError(
                f"distance matrix has shape {dist.shape}, expected {(len(points),) * 2}"
            )
        if len(set(points)) != len(points):
            raise MetricError("point ids are not distinct")
        if not isinstance(scale, (int, np.integer)) or scale < 1:
            raise MetricError(f"scale must be a positive integer, got {scale!r}")
        dist.setflags(write=False)
        self.points = points
        self.dist = dist
        self.scale = int(scale)
        self.index = {p: i for i, p in enumerate(points)}
        if check:
            self._validate()

    def _validate(self) -> None:
        D = self.dist
        n = len(self.points)
        if n == 0:
            return
        if (D < 0).any():
            i, j = np.argwhere(D < 0)[0]
            raise MetricError(f"negative distance between {self.points[i]} and {self.points[j]}")
        if np.diagonal(D).any():
            i = int(np.flatnonzero(np.diagonal(D))[0])
            raise MetricError(f"dist[{i}][{i}] is not zero")
        asym = np.argwhere(D != D.T)
        if len(asym):
            i, j = asym[0]
            raise MetricError(f"asymmetric: dist[{i}][{j}] != dist[{j}][{i}]")
        off = D + np.eye(n, dtype=np.int64)
        if (off <= 0).any():
            i, j = np.argwhere(off <= 0)[0]
            raise MetricError(
                f"not uniformly discrete: distinct points {self.points[i]}, {self.points[j]} at distance 0"
            )
        for k in range(n):
            bad = D > D[:, k][:, None] + D[k, :][None, :]
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise MetricError(
                    "triangle inequality fails: "
                    f"d({self.points[i]},{self.points[j]})={D[i, j]} > "
                    f"d({self.points[i]},{self.points[k]})+d({self.points[k]},{self.points[j]})"
                )

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"FiniteMetricSpace(n={len(self)}, diameter={self.diameter}, scale={self.scale})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteMetricSpace):
            return NotImplemented
        return (
            self.points == other.points
            and self.scale == other.scale
            and np.array_equal(self.dist, other.dist)
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def diameter(self) -> int:
        return int(self.dist.max()) if self.n else 0

    def resolve(self, x) -> int:
        """Point index for an id (str) or an index (int)."""
        if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
            if not 0 <= x < self.n:
                raise KeyError(f"unknown point index {x}")
            return int(x)
        try:
            return self.index[x]
        except KeyError:
            raise KeyError(f"unknown point {x!r}") from None

    def d(self, x, y) -> int:
        return int(self.dist[self.resolve(x), self.resolve(y)])

    def subspace(self, indices: Sequence[int]) -> "FiniteMetricSpace":
        idx = np.asarray(list(indices), dtype=np.int64)
        return FiniteMetricSpace(
            [self.points[i] for i in idx], self.dist[np.ix_(idx, idx)], self.scale, check=False
        )

    def max_ball_size(self, R: int) -> int:
        if self.n == 0:
            return 0
        return int((self.dist <= R).sum(axis=1).max())

    def to_document(self) -> dict:
        return {
            "points": list(self.points),
            "dist": self.dist.tolist(),
            "scale": self.scale,
        }


def load_space(document) -> FiniteMetricSpace:
    """Parse and validate a space document (JSON text or an already-decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MetricError(f"schema violation: not JSON ({exc})") from None
    if not isinstance(document, Mapping):
        raise MetricError("schema violation: space document must be an object")
    missing = {"points", "dist", "scale"} - set(document)
    if missing:
        raise MetricError(f"schema violation: missing keys {sorted(missing)}")
    points, dist, scale = document["points"], document["dist"], document["scale"]
    if not isinstance(points, list) or not all(isinstance(p, str) for p in points):
        raise MetricError("schema violation: points must be a list of strings")
    if not isinstance(dist, list) or not all(
        isinstance(row, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in row)
        for row in dist
    ):
        raise MetricError("schema violation: dist must be a list of integer lists")
    if not isinstance(scale, int) or isinstance(scale, bool):
        raise MetricError("schema violation: scale must be an integer")
    if len(dist) != len(points) or any(len(row) != len(points) for row in dist):
        raise MetricError("schema violation: dist must be square with one row per point")
    return FiniteMetricSpace(points, dist, scale)


def save_space(X: FiniteMetricSpace) -> str:
    return json.dumps(X.to_document())


def ball(X: FiniteMetricSpace, x, R: int) -> frozenset[int]:
    """Indices of the closed ball {y : d(x,y) <= R}."""
    if R < 0:
        raise ValueError("R must be non-negative")
    i = X.resolve(x)
    return frozenset(np.flatnonzero(X.dist[i] <= R).tolist())


def diag_neighborhood(X: FiniteMetricSpace, R: int, strict: bool = True) -> frozenset[tuple[int, int]]:
    """Pairs at distance < R (strict) or <= R (closed)."""
    mask = X.dist < R if strict else X.dist <= R
    return frozenset((int(i), int(j)) for i, j in np.argwhere(mask))


def greedy_separation(X: FiniteMetricSpace, R: int) -> list[int]:
    """Colour points in input order with the smallest colour (from 1) unused within distance R.

    Distinct points of the same colour are therefore at distance > R.
    """
    if R < 0:
        raise ValueError("R must be non-negative")
    colors: list[int] = []
    for j in range(X.n):
        near = np.flatnonzero(X.dist[j, :j] <= R)
        taken = {colors[i] for i in near}
        c = 1
        while c in taken:
            c += 1
        colors.append(c)
    return colors


def color_classes(colors: Sequence[int]) -> list[list[int]]:
    """Group point indices by colour, colours in increasing order."""
    classes: dict[int, list[int]] = {}
    for i, c in enumerate(colors):
        classes.setdefault(c, []).append(i)
    return [classes[c] for c in sorted(classes)]


@dataclass(frozen=True)
class ControlData:
    """Distortion step functions of a map between finite spaces.

    ``forward(r)`` bounds image distances of pairs at distance <= r;
    ``backward(s)`` bounds source distances of pairs whose images are within s.
    """

    x_levels: tuple[int, ...]
    forward_values: tuple[int, ...]
    y_levels: tuple[int, ...]
    backward_values: tuple[int, ...]
    injective: bool

    @staticmethod
    def _step(levels, values, t) -> int:
        if t < 0:
            raise ValueError("control functions are defined on non-negative distances")
        k = int(np.searchsorted(levels, t, side="right")) - 1
        return int(values[k]) if k >= 0 else 0

    def forward(self, r) -> int:
        return self._step(self.x_levels, self.forward_values, r)

    def backward(self, s) -> int:
        return self._step(self.y_levels, self.backward_values, s)


def _cummax_table(keys: np.ndarray, vals: np.ndarray) -> tuple[tuple[int, ...], tuple[int, ...]]:
    levels = np.unique(keys)
    best = np.full(len(levels), 0, dtype=np.int64)
    np.maximum.at(best, np.searchsorted(levels, keys), vals)
    return tuple(levels.tolist()), tuple(np.maximum.accumulate(best).tolist())


def resolve_map(phi, X: FiniteMetricSpace, Y: FiniteMetricSpace) -> np.ndarray:
    """Turn a point map (mapping of ids/indices, or a sequence indexed by X) into an index array."""
    if isinstance(phi, Mapping):
        out = np.full(X.n, -1, dtype=np.int64)
        for x, y in phi.items():
            out[X.resolve(x)] = Y.resolve(y)
        if (out < 0).any():
            missing = X.points[int(np.flatnonzero(out < 0)[0])]
            raise ValueError(f"map is not total: {missing!r} has no image")
        return out
    seq = list(phi)
    if len(seq) != X.n:
        raise ValueError(f"map has {len(seq)} values for {X.n} points")
    return np.array([Y.resolve(y) for y in seq], dtype=np.int64)


def control_functions(phi, X: FiniteMetricSpace, Y: FiniteMetricSpace) -> ControlData:
    f = resolve_map(phi, X, Y)
    dx = X.dist.ravel()
    dy = Y.dist[np.ix_(f, f)].ravel()
    xl, fw = _cummax_table(dx, dy)
    yl, bw = _cummax_table(dy, dx)
    return ControlData(xl, fw, yl, bw, injective=len(set(f.tolist())) == X.n)


def fin_blocks(X: FiniteMetricSpace, K: int) -> list[tuple[int, ...]]:
    """First K non-empty subsets, ordered by size then by their sorted id tuples."""
    if not 1 <= K <= 2 ** X.n - 1:
        raise ValueError(f"K={K} out of range 1..{2 ** X.n - 1}")
    order = sorted(range(X.n), key=lambda i: X.points[i])
    blocks: list[tuple[int, ...]] = []
    for size in range(1, X.n + 1):
        for combo in itertools.combinations(order, size):
            blocks.append(tuple(sorted(combo)))
            if len(blocks) == K:
                return blocks
    return blocks


def fin_space(X: FiniteMetricSpace, K: int) -> FiniteMetricSpace:
    """Disjoint union of the first K finite subsets, block i sitting at height i**2.

    d((x,i),(y,j)) = d(x,y) + scale * |i**2 - j**2|.
    """
    blocks = fin_blocks(X, K)
    src = np.array([x for b in blocks for x in b], dtype=np.int64)
    height = np.array([(i + 1) ** 2 for i, b in enumerate(blocks) for _ in b], dtype=np.int64)
    ids = [f"{X.points[x]}@{i + 1}" for i, b in enumerate(blocks) for x in b]
    D = X.dist[np.ix_(src, src)] + X.scale * np.abs(height[:, None] - height[None, :])
    return FiniteMetricSpace(ids, D, X.scale, check=False)


# -- standard instances ------------------------------------------------------


def path_space(n: int, prefix: str = "p", scale: int = 1) -> FiniteMetricSpace:
    idx = np.arange(n)
    return FiniteMetricSpace(
        [f"{prefix}{i}" for i in idx], np.abs(idx[:, None] - idx[None, :]) * scale, scale, check=False
    )


def cycle_space(n: int, prefix: str = "c") -> FiniteMetricSpace:
    idx = np.arange(n)
    diff = np.abs(idx[:, None] - idx[None, :])
    return FiniteMetricSpace([f"{prefix}{i}" for i in idx], np.minimum(diff, n - diff), check=False)


def graph_metric(n: int, edges: Iterable[tuple[int, int]], weights=None) -> np.ndarray:
    """All-pairs shortest-path matrix of a connected weighted graph on range(n)."""
    edges = list(edges)
    if n == 1:
        return np.zeros((1, 1), dtype=np.int64)
    w = np.ones(len(edges)) if weights is None else np.asarray(weights, dtype=float)
    rows = [a for a, _ in edges]
    cols = [b for _, b in edges]
    G = csr_matrix((w, (rows, cols)), shape=(n, n))
    D = shortest_path(G, directed=False, unweighted=weights is None)
    if not np.isfinite(D).all():
        raise MetricError("graph is not connected")
    return np.rint(D).astype(np.int64)


def random_space(
    rng: np.random.Generator,
    n: int,
    max_dist: int = 10,
    max_weight: int = 4,
    extra_edge_p: float = 0.15,
    prefix: str = "x",
) -> FiniteMetricSpace:
    """Random integer metric: truncated shortest-path metric of a random connected graph.

    Truncating a metric at a constant keeps the triangle inequality, so the result
    has all distances in 1..max_dist for distinct points.
    """
    if n == 1:
        return FiniteMetricSpace([f"{prefix}0"], [[0]])
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < extra_edge_p:
                edges.append((i, j))
    weights = rng.integers(1, max_weight + 1, size=len(edges))
    D = np.minimum(graph_metric(n, edges, weights), max_dist)
    return FiniteMetricSpace([f"{prefix}{i}" for i in range(n)], D)
