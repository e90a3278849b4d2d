"""Kernels and finite-propagation operators on a finite space.

On a finite space the uniform Roe algebra is the full matrix algebra, so a
kernel and the operator it defines share one type here; no completion is ever
taken.  PSD verdicts always carry the least eigenvalue so that callers can
apply their own threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .mspace import FiniteMetricSpace
from .ptrans import Chart, PartialBijection, _sigma_matrix, multiplicity

DEFAULT_TOL = 1e-9


class KernelError(ValueError):
    pass


class Kernel:
    """Dense matrix indexed by the points of a space."""

    def __init__(self, entries, space: FiniteMetricSpace | None = None, tol: float = DEFAULT_TOL):
        A = np.array(entries, copy=True)
        if A.dtype.kind not in "fc":
            A = A.astype(float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise KernelError(f"kernel must be square, got shape {A.shape}")
        if not np.isfinite(A).all():
            raise KernelError("kernel has non-finite entries")
        if space is not None and A.shape[0] != space.n:
            raise KernelError(f"kernel is {A.shape[0]}x{A.shape[0]} but the space has {space.n} points")
        if tol < 0:
            raise KernelError("tol must be non-negative")
        A.setflags(write=False)
        self.entries = A
        self.space = space
        self.tol = float(tol)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def hermitian(self) -> bool:
        return bool(np.abs(self.entries - self.entries.conj().T).max(initial=0.0) <= self.tol)

    @property
    def is_real(self) -> bool:
        return self.entries.dtype.kind == "f" or not np.abs(self.entries.imag).any()

    def adjoint(self) -> "Kernel":
        return Kernel(self.entries.conj().T, self.space, self.tol)

    def __matmul__(self, other: "Kernel") -> "Kernel":
        return Kernel(self.entries @ other.entries, self.space or other.space, max(self.tol, other.tol))

    def __repr__(self) -> str:
        return f"Kernel(n={self.n}, dtype={self.entries.dtype}, tol={self.tol:g})"

    def to_document(self, space_ref=None) -> dict:
        A = np.asarray(self.entries, dtype=complex)
        return {
            "space": space_ref,
            "entries": [[[repr(float(v.real)), repr(float(v.imag))] for v in row] for row in A],
        }


def _num(v) -> float:
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            raise KernelError(f"schema violation: {v!r} is not a decimal") from None
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise KernelError(f"schema violation: {v!r} is not a number")


def kernel_from_document(doc, space: FiniteMetricSpace | None = None, tol: float = DEFAULT_TOL) -> Kernel:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    if not isinstance(doc, Mapping) or "entries" not in doc:
        raise KernelError("schema violation: kernel document needs entries")
    rows = doc["entries"]
    try:
        A = np.array(
            [[complex(_num(c[0]), _num(c[1])) if isinstance(c, list) else _num(c) for c in row] for row in rows]
        )
    except (TypeError, IndexError):
        raise KernelError("schema violation: entries must be [[ [re, im], ... ], ...]") from None
    if A.dtype.kind == "c" and not A.imag.any():
        A = A.real
    return Kernel(A, space, tol)


def as_kernel(T, space=None, tol=DEFAULT_TOL) -> Kernel:
    return T if isinstance(T, Kernel) else Kernel(T, space, tol)


def _space_of(*kernels: Kernel, X: FiniteMetricSpace | None = None) -> FiniteMetricSpace:
    X = X or next((k.space for k in kernels if k.space is not None), None)
    if X is None:
        raise KernelError("no space attached to the kernel")
    return X


def propagation(T: Kernel, X: FiniteMetricSpace | None = None) -> int:
    """Smallest R with |T(x, y)| <= tol whenever d(x, y) > R."""
    X = _space_of(T, X=X)
    support = np.abs(T.entries) > T.tol
    if not support.any():
        return 0
    return int(X.dist[support].max())


@dataclass(frozen=True)
class PSDResult:
    ok: bool
    least_eigenvalue: float
    residual: float

    def __bool__(self) -> bool:
        return self.ok


def positive_type_check(u: Kernel) -> PSDResult:
    if not u.hermitian:
        raise KernelError("kernel is not hermitian within tol")
    A = (u.entries + u.entries.conj().T) / 2
    if A.shape[0] == 0:
        return PSDResult(True, 0.0, 0.0)
    w, V = np.linalg.eigh(A)
    lam, v = float(w[0]), V[:, 0]
    residual = float(np.linalg.norm(A @ v - lam * v))
    return PSDResult(lam >= -u.tol, lam, residual)


def least_eigenvalue(A) -> float:
    A = np.asarray(A)
    return float(np.linalg.eigvalsh((A + A.conj().T) / 2)[0])


def max_kernel_variation(u: Kernel, R, X: FiniteMetricSpace | None = None) -> float:
    """max |u(x, y) - 1| over pairs with d(x, y) <= R."""
    X = _space_of(u, X=X)
    return float(np.abs(u.entries[X.dist <= R] - 1).max(initial=0.0))


def variation_check(u: Kernel, R, eps, X: FiniteMetricSpace | None = None) -> bool:
    return max_kernel_variation(u, R, X) < eps


def schur_multiply(u: Kernel, T: Kernel) -> Kernel:
    if u.entries.shape != T.entries.shape:
        raise KernelError(f"dimension mismatch: {u.entries.shape} vs {T.entries.shape}")
    return Kernel(u.entries * T.entries, T.space or u.space, max(u.tol, T.tol))


@dataclass(frozen=True)
class SchurErrorReport:
    eps: float
    entrywise_ok: bool
    worst_ratio: float
    operator_error: float
    operator_norm: float


def schur_error(u: Kernel, T: Kernel, eps: float, ulps: int = 4) -> SchurErrorReport:
    """Entrywise bound |(T - u o T)(x, y)| <= eps |T(x, y)| on supp T, plus operator norms.

    ``ulps`` absorbs floating-point rounding of the product.
    """
    diff = T.entries - schur_multiply(u, T).entries
    absT = np.abs(T.entries)
    slack = eps * absT * (1 + ulps * np.finfo(float).eps)
    supp = absT > 0
    ok = bool((np.abs(diff)[supp] <= slack[supp]).all())
    ratio = float((np.abs(diff)[supp] / absT[supp]).max(initial=0.0))
    return SchurErrorReport(
        eps=eps,
        entrywise_ok=ok,
        worst_ratio=ratio,
        operator_error=float(np.linalg.norm(diff, 2)) if diff.size else 0.0,
        operator_norm=float(np.linalg.norm(T.entries, 2)) if diff.size else 0.0,
    )


def diag_restrict(T: Kernel) -> np.ndarray:
    return np.diagonal(T.entries).copy()


def translation_isometry(t: PartialBijection, X) -> Kernel:
    """0/1 matrix with a 1 at (x, y) for each (x, y) in t."""
    space = X if isinstance(X, FiniteMetricSpace) else None
    n = X.n if space is not None else int(X)
    M = np.zeros((n, n))
    for a, b in t.pairs:
        M[a, b] = 1.0
    return Kernel(M, space)


def algebra_dimension(generators: Sequence, cap: int = 64, tol: float = DEFAULT_TOL) -> int:
    """Linear dimension of the *-algebra generated by some matrices.

    Span closure under products and adjoints, with rank decided by two-pass
    Gram-Schmidt against a relative tolerance.
    """
    mats = [np.asarray(g.entries if isinstance(g, Kernel) else g, dtype=complex) for g in generators]
    if not mats:
        return 0
    n = mats[0].shape[0]
    if n > cap:
        raise ValueError(f"{n} points exceed cap={cap}")
    if any(m.shape != (n, n) for m in mats):
        raise KernelError("generators live on different spaces")
    basis = np.zeros((0, n * n), dtype=complex)
    elems: list[np.ndarray] = []
    queue: list[np.ndarray] = []

    def add(M) -> None:
        nonlocal basis
        v = M.ravel().copy()
        norm0 = np.linalg.norm(v)
        if norm0 <= tol:
            return
        for _ in range(2):
            if len(basis):
                v -= basis.T @ (basis.conj() @ v)
        r = np.linalg.norm(v)
        if r <= tol * norm0:
            return
        v /= r
        if len(basis) >= n * n:
            raise ArithmeticError("span exceeded the full matrix algebra; tol is misconfigured")
        basis = np.vstack([basis, v])
        E = v.reshape(n, n)
        elems.append(E)
        queue.append(E)

    for m in mats:
        add(m)
    while queue:
        A = queue.pop()
        add(A.conj().T)
        for B in list(elems):
            add(A @ B)
            add(B @ A)
    return len(basis)


@dataclass
class ClaimResult:
    """Block matrix (t_xy) with t_xy = s_x* s_y, stored as an n^2 x n^2 array.

    Row (x, x') and column (y, y') sit at ``x*n + x'`` and ``y*n + y'``.
    """

    matrix: np.ndarray
    n: int
    least_eigenvalue: float
    entries_ok: bool
    orbits_ok: bool
    distinct_blocks: int
    witnesses: dict = field(default_factory=dict)

    def block(self, x: int, y: int) -> np.ndarray:
        n = self.n
        return self.matrix[x * n:(x + 1) * n, y * n:(y + 1) * n]


def claim_matrix(X: FiniteMetricSpace, chart: Chart, radius: int | None = None) -> ClaimResult:
    """Assemble (t_xy) for a free chart and check its advertised properties.

    ``radius`` (default ``chart.R``) bounds the pairs d(x, y) <= radius on which
    <delta_x, t_xy delta_y> = 1 is asserted.  For every pair covered by the
    chart, t_xy is compared with the translation containing it.
    """
    n = X.n
    sigmas = chart.cotranslations
    if multiplicity(sigmas, n) != 1:
        raise KernelError("chart not free: some x -> x' is realised by several cotranslations")
    radius = chart.R if radius is None else radius
    S = _sigma_matrix(sigmas, n)
    m = len(sigmas)
    # s_x delta_{x'} = delta_sigma where sigma x = x'; all s_x side by side
    big = np.zeros((m, n * n))
    rows, xs = np.nonzero(S >= 0)
    big[rows, xs * n + S[rows, xs]] = 1.0
    M = big.T @ big
    lam = least_eigenvalue(M) if M.size else 0.0

    witnesses: dict = {}
    near = np.argwhere(X.dist <= radius)
    diag_vals = M[near[:, 0] * n + near[:, 0], near[:, 1] * n + near[:, 1]]
    entries_ok = bool((diag_vals == 1).all())
    if not entries_ok:
        j = int(np.flatnonzero(diag_vals != 1)[0])
        witnesses["entry"] = tuple(int(v) for v in near[j])

    orbits_ok = True
    distinct = set()
    for t in chart.translations:
        T = np.zeros((n, n))
        for a, b in t.pairs:
            T[a, b] = 1.0
        for x, y in t.pairs:
            blk = M[x * n:(x + 1) * n, y * n:(y + 1) * n]
            if not np.array_equal(blk, T):
                orbits_ok = False
                witnesses.setdefault("orbit", (x, y))
    for x, y in near:
        distinct.add(M[x * n:(x + 1) * n, y * n:(y + 1) * n].tobytes())
    return ClaimResult(M, n, lam, entries_ok, orbits_ok, len(distinct), witnesses)


def right_regular_span_rank(G, tol: float = DEFAULT_TOL) -> int:
    """Rank (by SVD) of the span of the right-regular representation matrices of G."""
    n = G.order
    mats = np.zeros((n, n * n))
    for g in range(n):
        M = np.zeros((n, n))
        M[np.arange(n), G.table[np.arange(n), g]] = 1.0
        mats[g] = M.ravel()
    return int(np.linalg.matrix_rank(mats, tol=tol))
