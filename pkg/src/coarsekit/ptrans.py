"""Partial bijections, partial translations and cotranslations, atlases.

Conventions
-----------
A partial bijection is a set of index pairs ``(x, y)`` whose two coordinate
projections are injective.  Relational composition is
``compose(s, t) = {(x, z) : (x, y) in s, (y, z) in t}``, which matches the
product of the 0/1 matrices of ``s`` and ``t``.

A cotranslation ``sigma`` is stored as the graph of the partial map it
describes, i.e. its pairs are ``(x, sigma(x))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .mspace import FiniteMetricSpace, color_classes, control_functions, greedy_separation, resolve_map

if TYPE_CHECKING:
    from .group import FiniteGroup


class PartialBijectionError(ValueError):
    pass


class AtlasError(ValueError):
    pass


class PartialBijection:
    __slots__ = ("pairs", "_fwd", "_bwd")

    def __init__(self, pairs: Iterable[tuple[int, int]] = ()):
        pairs = frozenset((int(a), int(b)) for a, b in pairs)
        fwd: dict[int, int] = {}
        bwd: dict[int, int] = {}
        for a, b in sorted(pairs):
            if a in fwd:
                raise PartialBijectionError(
                    f"first projection not injective: ({a},{fwd[a]}) and ({a},{b})"
                )
            if b in bwd:
                raise PartialBijectionError(
                    f"second projection not injective: ({bwd[b]},{b}) and ({a},{b})"
                )
            fwd[a] = b
            bwd[b] = a
        self.pairs = pairs
        self._fwd = fwd
        self._bwd = bwd

    @classmethod
    def identity(cls, points: Iterable[int]) -> "PartialBijection":
        return cls((x, x) for x in points)

    @classmethod
    def from_map(cls, mapping: Mapping[int, int]) -> "PartialBijection":
        return cls(mapping.items())

    def __call__(self, x: int):
        """Image of x when the bijection is read as the partial map x -> y; None if undefined."""
        return self._fwd.get(x)

    def preimage(self, y: int):
        return self._bwd.get(y)

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self._fwd)

    @property
    def image(self) -> frozenset[int]:
        return frozenset(self._bwd)

    def inverse(self) -> "PartialBijection":
        return PartialBijection((b, a) for a, b in self.pairs)

    def compose(self, other: "PartialBijection") -> "PartialBijection":
        return PartialBijection(
            (x, other._fwd[y]) for x, y in self._fwd.items() if y in other._fwd
        )

    def as_array(self, n: int) -> np.ndarray:
        out = np.full(n, -1, dtype=np.int64)
        for a, b in self._fwd.items():
            out[a] = b
        return out

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self.pairs))

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pairs

    def __eq__(self, other) -> bool:
        if isinstance(other, PartialBijection):
            return self.pairs == other.pairs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.pairs)

    def __repr__(self) -> str:
        body = ", ".join(f"({a},{b})" for a, b in self)
        return f"PartialBijection({{{body}}})"


def pb_compose(s: PartialBijection, t: PartialBijection) -> PartialBijection:
    return s.compose(t)


def pb_inverse(t: PartialBijection) -> PartialBijection:
    return t.inverse()


def check_translation(X: FiniteMetricSpace, t) -> int:
    """Maximal displacement d(x, y) over (x, y) in t; 0 for the empty bijection."""
    if not isinstance(t, PartialBijection):
        t = PartialBijection(t)
    if not len(t):
        return 0
    a = np.fromiter((p[0] for p in t.pairs), dtype=np.int64)
    b = np.fromiter((p[1] for p in t.pairs), dtype=np.int64)
    return int(X.dist[a, b].max())


def cotranslation_violation(sigma: PartialBijection, translations: Sequence[PartialBijection]):
    """First (t index, (x, y)) whose image under sigma leaves t, or None."""
    for ti, t in enumerate(translations):
        for x, y in t:
            sx, sy = sigma(x), sigma(y)
            if sx is None or sy is None:
                continue
            if (sx, sy) not in t.pairs:
                return ti, (x, y)
    return None


def check_cotranslation(sigma: PartialBijection, translations: Sequence[PartialBijection]) -> bool:
    return cotranslation_violation(sigma, translations) is None


# -- atlases -----------------------------------------------------------------


@dataclass
class Chart:
    """One radius of an atlas: disjoint translations T_R and cotranslations Sigma_R."""

    R: int
    translations: tuple[PartialBijection, ...]
    cotranslations: tuple[PartialBijection, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.translations = tuple(self.translations)
        self.cotranslations = tuple(self.cotranslations)


@dataclass
class Atlas:
    charts: dict[int, Chart]

    @classmethod
    def from_charts(cls, charts: Iterable[Chart]) -> "Atlas":
        out: dict[int, Chart] = {}
        for c in charts:
            if c.R in out:
                raise AtlasError(f"duplicate chart for R={c.R}")
            out[c.R] = c
        return cls(dict(sorted(out.items())))

    @property
    def radii(self) -> list[int]:
        return sorted(self.charts)

    def __getitem__(self, R: int) -> Chart:
        return self.charts[R]

    def __iter__(self) -> Iterator[Chart]:
        return iter(self.charts[R] for R in self.radii)

    def __len__(self) -> int:
        return len(self.charts)


@dataclass
class ChartReport:
    R: int
    axiom1: bool
    axiom2: bool
    axiom3: bool
    cotranslations_ok: bool
    k: int
    free: bool
    globally_controlled: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.axiom1 and self.axiom2 and self.axiom3 and self.cotranslations_ok


@dataclass
class AtlasReport:
    charts: list[ChartReport]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.charts)

    @property
    def free(self) -> bool:
        return all(c.free for c in self.charts)

    @property
    def globally_controlled(self) -> bool:
        return all(c.globally_controlled for c in self.charts)

    def __getitem__(self, R: int) -> ChartReport:
        for c in self.charts:
            if c.R == R:
                return c
        raise KeyError(R)


def _sigma_matrix(sigmas: Sequence[PartialBijection], n: int) -> np.ndarray:
    S = np.full((len(sigmas), n), -1, dtype=np.int64)
    for i, s in enumerate(sigmas):
        for a, b in s._fwd.items():
            S[i, a] = b
    return S


def _distinct_per_column(M: np.ndarray, sentinel: int) -> np.ndarray:
    Ms = np.sort(M, axis=0)
    new = np.ones(Ms.shape, dtype=bool)
    new[1:] = Ms[1:] != Ms[:-1]
    new &= Ms != sentinel
    return new.sum(axis=0)


def multiplicity(sigmas: Sequence[PartialBijection], n: int) -> int:
    """k: the largest number of sigmas sending one point x to one point x'."""
    S = _sigma_matrix(sigmas, n)
    if not S.size:
        return 0
    xs = np.broadcast_to(np.arange(n), S.shape)
    valid = S >= 0
    if not valid.any():
        return 0
    return int(np.bincount((xs[valid] * n + S[valid]), minlength=n * n).max())


def verify_chart(X: FiniteMetricSpace, chart: Chart) -> ChartReport:
    n, R = X.n, chart.R
    T = chart.translations
    owner = np.full((n, n), -1, dtype=np.int64)
    for ti, t in enumerate(T):
        for a, b in t.pairs:
            if not (0 <= a < n and 0 <= b < n):
                raise AtlasError(f"malformed chart: pair ({a},{b}) outside the space")
            if owner[a, b] >= 0:
                raise AtlasError(
                    f"malformed chart: translations {owner[a, b]} and {ti} overlap at ({a},{b})"
                )
            owner[a, b] = ti
    witnesses: dict = {}

    uncovered = np.argwhere((X.dist < R) & (owner < 0))
    axiom1 = not len(uncovered)
    if not axiom1:
        witnesses["uncovered_pair"] = tuple(int(v) for v in uncovered[0])

    sigmas = chart.cotranslations
    S = _sigma_matrix(sigmas, n)
    k = multiplicity(sigmas, n)

    px, py = np.nonzero(owner >= 0)
    P = len(px)
    pair_id = np.full((n, n), -1, dtype=np.int64)
    pair_id[px, py] = np.arange(P)
    tid = owner[px, py]
    codes = []
    cot_ok = True
    for si in range(len(sigmas)):
        sx, sy = S[si, px], S[si, py]
        src = np.flatnonzero((sx >= 0) & (sy >= 0))
        if not len(src):
            continue
        img = pair_id[sx[src], sy[src]]
        bad = (img < 0) | (tid[np.maximum(img, 0)] != tid[src])
        if bad.any():
            if cot_ok:
                j = src[np.flatnonzero(bad)[0]]
                witnesses["cotranslation_violation"] = {
                    "sigma": si,
                    "pair": (int(px[j]), int(py[j])),
                    "image": (int(S[si, px[j]]), int(S[si, py[j]])),
                }
            cot_ok = False
        good = ~bad
        codes.append(src[good] * P + img[good])
    reached = np.unique(np.concatenate(codes)) if codes else np.zeros(0, dtype=np.int64)
    per_t = np.bincount(tid[reached // P], minlength=len(T)) if P else np.zeros(len(T), int)
    sizes = np.array([len(t) for t in T], dtype=np.int64)
    short = np.flatnonzero(per_t != sizes**2)
    axiom3 = not len(short)
    if not axiom3:
        ti = int(short[0])
        members = np.flatnonzero(tid == ti)
        hit = set(reached.tolist())
        for a in members:
            for b in members:
                if int(a * P + b) not in hit:
                    witnesses["axiom3_missing"] = {
                        "translation": ti,
                        "from": (int(px[a]), int(py[a])),
                        "to": (int(px[b]), int(py[b])),
                    }
                    break
            if "axiom3_missing" in witnesses:
                break

    gc = True
    if len(sigmas):
        Sv = S >= 0
        for x in range(n):
            A = S[:, x]
            valid = Sv & (A >= 0)[:, None]
            a_col = np.where(valid, A[:, None], n)
            b_col = np.where(valid, S, n)
            p_col = np.where(valid, A[:, None] * n + S, n * n)
            ca = _distinct_per_column(a_col, n)
            cb = _distinct_per_column(b_col, n)
            cp = _distinct_per_column(p_col, n * n)
            bad = np.flatnonzero((cp != ca) | (cp != cb))
            if len(bad):
                gc = False
                witnesses["uncontrolled_orbit"] = (x, int(bad[0]))
                break

    return ChartReport(
        R=R,
        axiom1=axiom1,
        axiom2=True,
        axiom3=axiom3,
        cotranslations_ok=cot_ok,
        k=k,
        free=k == 1,
        globally_controlled=gc,
        witnesses=witnesses,
    )


def verify_atlas(X: FiniteMetricSpace, atlas) -> AtlasReport:
    charts = [atlas] if isinstance(atlas, Chart) else list(atlas)
    return AtlasReport([verify_chart(X, c) for c in charts])


def orbit(chart: Chart, x: int, y: int) -> set[tuple[int, int]]:
    """Cotranslation orbit {(sigma x, sigma y)} of a pair."""
    out = set()
    for s in chart.cotranslations:
        sx, sy = s(x), s(y)
        if sx is not None and sy is not None:
            out.add((sx, sy))
    return out


# -- constructions -----------------------------------------------------------


def _dedupe(items: Iterable[PartialBijection]) -> list[PartialBijection]:
    seen = set()
    out = []
    for s in items:
        if s.pairs and s not in seen:
            seen.add(s)
            out.append(s)
    return out


def coloring_chart(X: FiniteMetricSpace, R: int) -> Chart:
    if R <= 0:
        raise ValueError("radii must be positive")
    # same colour => d > 2R, i.e. classes are (2R+1)-separated
    colors = greedy_separation(X, 2 * R)
    classes = color_classes(colors)
    nc = len(classes)
    blocks: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for i, Xi in enumerate(classes):
        for j, Xj in enumerate(classes):
            sub = X.dist[np.ix_(Xi, Xj)] <= R
            pairs = [(Xi[a], Xj[b]) for a, b in np.argwhere(sub)]
            if pairs:
                blocks[i, j] = sorted(pairs)
    translations = [PartialBijection(p) for p in blocks.values()]
    sigmas = []
    for (i, j), pairs in blocks.items():
        if i > j:
            continue
        L = len(pairs)
        for m in range(L):
            cells = {}
            for k, (x, y) in enumerate(pairs):
                x2, y2 = pairs[(k + m) % L]
                cells[x] = x2
                cells[y] = y2
            sigmas.append(PartialBijection.from_map(cells))
    return Chart(
        R,
        translations,
        _dedupe(sigmas),
        meta={"method": "coloring", "colors": nc, "separation": 2 * R + 1, "k_bound": nc * (nc + 1) // 2},
    )


def build_atlas_coloring(X: FiniteMetricSpace, radii: Iterable[int]) -> Atlas:
    return Atlas.from_charts(coloring_chart(X, R) for R in radii)


def pullback_chart(X: FiniteMetricSpace, f: np.ndarray, G: "FiniteGroup", S: int, R: int) -> Chart:
    """Chart from an injective map f: X -> G, translations g<> with |g| <= S."""
    inv, table, length = G.inverse, G.table, G.lengths
    g = table[inv[f][:, None], f[None, :]]  # g[x, y] = f(x)^-1 f(y)
    h = table[f[None, :], inv[f][:, None]]  # h[x, x'] = f(x') f(x)^-1
    translations = []
    for gi in np.unique(g):
        if length[gi] <= S:
            translations.append(PartialBijection(map(tuple, np.argwhere(g == gi))))
    sigmas = [PartialBijection(map(tuple, np.argwhere(h == hi))) for hi in np.unique(h)]
    return Chart(R, translations, sigmas, meta={"method": "pullback", "S": int(S)})


def pullback_atlas(X: FiniteMetricSpace, phi, G: "FiniteGroup", radii: Iterable[int]) -> Atlas:
    Y = G.metric
    f = resolve_map(phi, X, Y)
    ctrl = control_functions(f, X, Y)
    if not ctrl.injective:
        raise ValueError("phi is not injective")
    charts = []
    for R in radii:
        if R <= 0:
            raise ValueError("radii must be positive")
        charts.append(pullback_chart(X, f, G, ctrl.forward(R), R))
    return Atlas.from_charts(charts)


# -- documents ---------------------------------------------------------------


def chart_to_document(chart: Chart) -> dict:
    return {
        "R": int(chart.R),
        "translations": [[list(p) for p in t] for t in chart.translations],
        "cotranslations": [[list(p) for p in s] for s in chart.cotranslations],
    }


def chart_from_document(doc: Mapping, X: FiniteMetricSpace | None = None) -> Chart:
    try:
        R = doc["R"]
        ts = doc["translations"]
        ss = doc["cotranslations"]
    except (KeyError, TypeError):
        raise AtlasError("schema violation: chart needs R, translations, cotranslations") from None
    if not isinstance(R, int) or isinstance(R, bool):
        raise AtlasError("schema violation: R must be an integer")

    def parse(block):
        pairs = []
        for p in block:
            if not (isinstance(p, list) and len(p) == 2 and all(isinstance(v, int) for v in p)):
                raise AtlasError(f"schema violation: bad pair {p!r}")
            if X is not None and not all(0 <= v < X.n for v in p):
                raise AtlasError(f"pair {p!r} refers to a point outside the space")
            pairs.append(tuple(p))
        return PartialBijection(pairs)

    return Chart(R, [parse(t) for t in ts], [parse(s) for s in ss])


def load_atlas(document, X: FiniteMetricSpace | None = None) -> Atlas:
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    docs = document if isinstance(document, list) else [document]
    return Atlas.from_charts(chart_from_document(d, X) for d in docs)


def atlas_document(atlas: Atlas):
    docs = [chart_to_document(c) for c in atlas]
    return docs[0] if len(docs) == 1 else docs
