"""Property A certificates in eight equivalent forms, and conversions between them.

Vector payloads are dense arrays whose row x is xi_x.  For ``hilbert`` the
columns are an abstract orthonormal index; for every other vector variant they
are the points of the space.  Set payloads (``yu-sets``) are lists of frozensets
of (point index, natural number) pairs.  Every conversion measures its output
against the closed-form bound it promises and records the numbers in
``measurements``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .mspace import FiniteMetricSpace
from .roe import DEFAULT_TOL, Kernel, max_kernel_variation, positive_type_check, propagation

VARIANTS = ("yu-sets", "l1", "l2", "l2-delta", "l2-delta-weak", "hilbert", "kernel-real", "kernel-roe")
VECTOR_VARIANTS = ("l1", "l2", "l2-delta", "l2-delta-weak", "hilbert")
KERNEL_VARIANTS = ("kernel-real", "kernel-roe")

_REQUIRED = {
    "yu-sets": ("R", "eps", "S"),
    "l1": ("R", "eps", "S"),
    "l2": ("R", "eps", "S"),
    "l2-delta": ("R", "eps", "S", "delta"),
    "l2-delta-weak": ("R", "eps", "S"),
    "hilbert": ("R", "eps", "S"),
    "kernel-real": ("R", "eps", "S"),
    "kernel-roe": ("R", "eps"),
}


class CertificateError(ValueError):
    pass


@dataclass
class PropACertificate:
    variant: str
    params: dict
    payload: object
    measurements: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise CertificateError(f"unknown variant {self.variant!r}")
        missing = [p for p in _REQUIRED[self.variant] if p not in self.params]
        if missing:
            raise CertificateError(f"{self.variant} certificate needs params {missing}")
        if self.variant in VECTOR_VARIANTS:
            P = np.asarray(self.payload)
            if P.ndim != 2 or not np.isfinite(P).all():
                raise CertificateError("vector payload must be a finite 2-d array")
            self.payload = P
        elif self.variant in KERNEL_VARIANTS:
            if not isinstance(self.payload, Kernel):
                self.payload = Kernel(self.payload)
        else:
            sets = [frozenset((int(y), int(k)) for y, k in A) for A in self.payload]
            if any(not A for A in sets):
                raise CertificateError("A_x must be non-empty")
            self.payload = sets

    @property
    def R(self):
        return self.params["R"]

    @property
    def eps(self):
        return self.params["eps"]

    @property
    def S(self):
        return self.params.get("S")


@dataclass
class CertificateReport:
    variant: str
    checks: dict
    witnesses: dict = field(default_factory=dict)
    measurements: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


# -- measurement helpers -----------------------------------------------------


def _pairs(X: FiniteMetricSpace, mask: np.ndarray) -> np.ndarray:
    """Pairs (x, y) with x < y selected by a boolean matrix."""
    P = np.argwhere(np.triu(mask, 1))
    return P


def _max_over_pairs(values: np.ndarray, pairs: np.ndarray):
    if len(pairs) == 0:
        return 0.0, None
    j = int(np.argmax(values))
    return float(values[j]), (int(pairs[j, 0]), int(pairs[j, 1]))


def vector_variation(V: np.ndarray, X: FiniteMetricSpace, R, ord: int = 2, strict: bool = False):
    """Largest ||xi_x - xi_y|| over d(x, y) <= R (or < R), with the worst pair."""
    mask = X.dist < R if strict else X.dist <= R
    pairs = _pairs(X, mask)
    out = np.empty(len(pairs))
    for s in range(0, len(pairs), 4096):
        p = pairs[s:s + 4096]
        out[s:s + 4096] = np.linalg.norm(V[p[:, 0]] - V[p[:, 1]], ord=ord, axis=1)
    return _max_over_pairs(out, pairs)


def yu_ratio(A: frozenset, B: frozenset) -> float:
    inter = len(A & B)
    return math.inf if inter == 0 else len(A ^ B) / inter


def _support_ok(V: np.ndarray, X: FiniteMetricSpace, S):
    bad = np.argwhere((V != 0) & (X.dist > S))
    return len(bad) == 0, (tuple(int(v) for v in bad[0]) if len(bad) else None)


# -- verification ------------------------------------------------------------


def verify_certificate(cert: PropACertificate, X: FiniteMetricSpace, tol: float = DEFAULT_TOL) -> CertificateReport:
    v, p = cert.variant, cert.params
    R, eps = p["R"], p["eps"]
    checks: dict = {}
    wit: dict = {}
    meas: dict = {}

    if v == "yu-sets":
        A = cert.payload
        if len(A) != X.n:
            raise CertificateError(f"payload has {len(A)} sets for {X.n} points")
        checks["nonempty"] = all(A)
        worst, wpair = 0.0, None
        for x, y in _pairs(X, X.dist < R):
            r = yu_ratio(A[x], A[y])
            if r > worst or wpair is None:
                worst, wpair = r, (int(x), int(y))
        checks["variation"] = worst < eps
        meas["variation"] = worst
        wit["variation"] = wpair
        far = [(x, y) for x in range(X.n) for y, _ in A[x] if not 0 <= y < X.n or X.dist[x, y] > p["S"]]
        checks["support"] = not far
        wit["support"] = far[0] if far else None
        return CertificateReport(v, checks, wit, meas)

    if v in KERNEL_VARIANTS:
        u = cert.payload
        if u.n != X.n:
            raise CertificateError(f"kernel is {u.n}x{u.n} for {X.n} points")
        if v == "kernel-real":
            checks["real"] = bool(u.is_real)
        checks["hermitian"] = bool(u.hermitian)
        if u.hermitian:
            psd = positive_type_check(u)
            checks["positive"] = psd.ok
            meas["least_eigenvalue"] = psd.least_eigenvalue
            wit["positive"] = psd.least_eigenvalue
        else:
            checks["positive"] = False
        var = max_kernel_variation(u, R, X)
        checks["variation"] = var < eps
        meas["variation"] = var
        prop = propagation(u, X)
        meas["propagation"] = prop
        if v == "kernel-real":
            checks["propagation"] = prop <= p["S"]
        return CertificateReport(v, checks, wit, meas)

    V = cert.payload
    if V.shape[0] != X.n:
        raise CertificateError(f"payload has {V.shape[0]} vectors for {X.n} points")
    if v != "hilbert" and V.shape[1] != X.n:
        raise CertificateError("vector payload must be indexed by the points of the space")
    ord_ = 1 if v == "l1" else 2
    norms = np.linalg.norm(V, ord=ord_, axis=1)
    checks["normalized"] = bool(np.abs(norms - 1).max(initial=0.0) <= tol)
    wit["normalized"] = int(np.argmax(np.abs(norms - 1))) if X.n else None
    if v == "l1":
        checks["nonnegative"] = bool((V >= 0).all())
    var, pair = vector_variation(V, X, R, ord_)
    checks["variation"] = var < eps
    meas["variation"] = var
    wit["variation"] = pair
    if v in ("l1", "l2"):
        checks["support"], wit["support"] = _support_ok(V, X, p["S"])
    elif v == "l2-delta":
        inside = np.where(X.dist <= p["S"], V, 0)
        mass = np.linalg.norm(inside, axis=1)
        checks["ball_mass"] = bool((mass >= 1 - p["delta"]).all())
        meas["min_ball_mass"] = float(mass.min(initial=1.0))
        wit["ball_mass"] = int(np.argmin(mass)) if X.n else None
    elif v == "l2-delta-weak":
        ring = (X.dist > p["S"]) & (X.dist <= R + p["S"])
        annulus = np.linalg.norm(np.where(ring, V, 0), axis=1)
        checks["annulus"] = bool((annulus <= eps).all())
        meas["max_annulus_mass"] = float(annulus.max(initial=0.0))
        wit["annulus"] = int(np.argmax(annulus)) if X.n else None
    elif v == "hilbert":
        G = V.conj() @ V.T
        bad = np.argwhere((np.abs(G) > tol) & (X.dist > p["S"]))
        checks["orthogonal"] = len(bad) == 0
        wit["orthogonal"] = tuple(int(t) for t in bad[0]) if len(bad) else None
    return CertificateReport(v, checks, wit, meas)


# -- constructions -----------------------------------------------------------


def _just_above(v: float) -> float:
    """A strict upper bound that survives squaring and halving in floating point.

    The absolute floor keeps eps**2 / 2 above the rounding of a Gram matrix.
    """
    return float(v * (1 + 1e-9) + 1e-7)


def ball_certificate(X: FiniteMetricSpace, S: int, R: int = 1, eps: float | None = None) -> PropACertificate:
    """xi_x = normalised indicator of B_S(x); eps defaults to just above the measured variation."""
    if S < 0:
        raise CertificateError("S must be non-negative")
    B = (X.dist <= S).astype(float)
    V = B / np.sqrt(B.sum(axis=1, keepdims=True))
    var, _ = vector_variation(V, X, R)
    if eps is None:
        eps = _just_above(var)
    return PropACertificate("l2", {"R": R, "eps": eps, "S": S}, V, {"variation": var})


def gaussian_certificate(X: FiniteMetricSpace, width: float, R: int = 1, S: int = 0, eps: float | None = None):
    """Normalised Gaussian profiles xi_x(z) ~ exp(-(d(x,z)/width)^2), as an l2-delta-weak certificate."""
    V = np.exp(-((X.dist / width) ** 2))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    var, _ = vector_variation(V, X, R)
    ring = (X.dist > S) & (X.dist <= R + S)
    annulus = float(np.linalg.norm(np.where(ring, V, 0), axis=1).max(initial=0.0))
    inside = float(np.linalg.norm(np.where(X.dist <= S, V, 0), axis=1).min(initial=1.0))
    if eps is None:
        eps = _just_above(max(var, annulus))
    params = {"R": R, "eps": eps, "S": S, "delta": 1 - inside}
    return PropACertificate("l2-delta-weak", params, V, {"variation": var, "max_annulus_mass": annulus})


def as_variant(cert: PropACertificate, variant: str, **params) -> PropACertificate:
    """Re-read a certificate under a weaker clause with the same payload."""
    allowed = {
        ("l2", "l2-delta"),
        ("l2", "l2-delta-weak"),
        ("l2", "hilbert"),
        ("l2-delta", "l2-delta-weak"),
        ("kernel-real", "kernel-roe"),
    }
    if (cert.variant, variant) not in allowed and cert.variant != variant:
        raise CertificateError(f"no definitional passage from {cert.variant} to {variant}")
    new = dict(cert.params)
    new.update(params)
    if variant == "l2-delta" and "delta" not in new:
        raise CertificateError("l2-delta needs delta")
    return PropACertificate(variant, new, cert.payload)


def yusets_to_l1(cert: PropACertificate, X: FiniteMetricSpace) -> PropACertificate:
    """xi_x(y) = |A_x n ({y} x N)| / |A_x|.

    The strict d < R of the set clause becomes d <= R - 1 on integer distances,
    and the measured l1 variation is compared pairwise with 2|A_x ^ A_y| / max(|A_x|, |A_y|).
    """
    if cert.variant != "yu-sets":
        raise CertificateError("expected a yu-sets certificate")
    A = cert.payload
    n = X.n
    V = np.zeros((n, n))
    for x, Ax in enumerate(A):
        if not Ax:
            raise CertificateError(f"A_x empty at {x}")
        for y, _ in Ax:
            V[x, y] += 1
        V[x] /= len(Ax)
    R_out = cert.R - 1
    worst_excess = -math.inf
    for x, y in _pairs(X, np.ones((n, n), bool)):
        lhs = np.abs(V[x] - V[y]).sum()
        rhs = 2 * len(A[x] ^ A[y]) / max(len(A[x]), len(A[y]))
        worst_excess = max(worst_excess, lhs - rhs)
    var, _ = vector_variation(V, X, R_out, 1)
    meas = {"variation": var, "bound_ok": bool(worst_excess <= 1e-12), "worst_excess": worst_excess if n > 1 else 0.0}
    params = {"R": R_out, "eps": 2 * cert.eps, "S": cert.S}
    return PropACertificate("l1", params, V, meas)


def l1_to_l2(cert: PropACertificate, X: FiniteMetricSpace) -> PropACertificate:
    """eta_x = sqrt(xi_x) pointwise; ||eta_x - eta_y||_2^2 <= ||xi_x - xi_y||_1 is checked pairwise."""
    if cert.variant != "l1":
        raise CertificateError("expected an l1 certificate")
    V = cert.payload
    if (V < 0).any():
        raise CertificateError("l1 payload has negative entries")
    E = np.sqrt(V)
    worst_excess = 0.0
    pairs = _pairs(X, np.ones((X.n, X.n), bool))
    if len(pairs):
        l2sq = ((E[pairs[:, 0]] - E[pairs[:, 1]]) ** 2).sum(axis=1)
        l1 = np.abs(V[pairs[:, 0]] - V[pairs[:, 1]]).sum(axis=1)
        worst_excess = float((l2sq - l1).max())
    var, _ = vector_variation(E, X, cert.R)
    meas = {"variation": var, "bound_ok": worst_excess <= 1e-12, "worst_excess": worst_excess}
    params = {"R": cert.R, "eps": math.sqrt(cert.eps), "S": cert.S}
    return PropACertificate("l2", params, E, meas)


def truncate_normalize(cert: PropACertificate, X: FiniteMetricSpace) -> PropACertificate:
    """zeta_x = xi_x restricted to B_{R+S}(x), eta_x = zeta_x / ||zeta_x||; bound 6 eps / (1 - delta)."""
    if cert.variant not in ("l2-delta-weak", "l2-delta"):
        raise CertificateError("expected an l2-delta-weak certificate")
    R, eps, S = cert.R, cert.eps, cert.S
    delta = cert.params.get("delta", 0.0)
    if not delta < 1:
        raise CertificateError("delta must be < 1")
    Z = np.where(X.dist <= R + S, cert.payload, 0)
    norms = np.linalg.norm(Z, axis=1)
    if (norms == 0).any():
        raise CertificateError(f"zeta_x vanishes at {int(np.argmin(norms))}")
    E = Z / norms[:, None]
    bound = 6 * eps / (1 - delta)
    var, pair = vector_variation(E, X, R)
    meas = {"variation": var, "bound": bound, "bound_ok": var <= bound, "worst_pair": pair}
    return PropACertificate("l2", {"R": R, "eps": bound, "S": R + S}, E, meas)


def vectors_to_kernel(cert: PropACertificate, X: FiniteMetricSpace, tol: float = DEFAULT_TOL) -> PropACertificate:
    """u(x, y) = Re <xi_x, xi_y>, so ||xi_x - xi_y||^2 = 2 - 2 u(x, y) for unit vectors."""
    if cert.variant not in ("l2", "hilbert"):
        raise CertificateError("expected an l2 or hilbert certificate")
    V = cert.payload
    norms = np.linalg.norm(V, axis=1)
    if np.abs(norms - 1).max(initial=0.0) > tol:
        raise CertificateError(f"non-unit vector at {int(np.argmax(np.abs(norms - 1)))}")
    u = np.real(V.conj() @ V.T)
    u = (u + u.T) / 2
    S_out = 2 * cert.S if cert.variant == "l2" else cert.S
    meas = {"identity_error": identity_error(V, u)}
    params = {"R": cert.R, "eps": cert.eps ** 2 / 2, "S": S_out}
    return PropACertificate("kernel-real", params, Kernel(u, X, tol), meas)


def identity_error(V: np.ndarray, u: np.ndarray) -> float:
    """max over all pairs of | ||xi_x - xi_y||^2 - (2 - 2 u(x, y)) |, computed directly."""
    worst = 0.0
    for x in range(V.shape[0]):
        D = (np.abs(V[x] - V) ** 2).sum(axis=1)
        worst = max(worst, float(np.abs(D - (2 - 2 * u[x])).max(initial=0.0)))
    return worst


def psd_sqrt(A: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Square root by symmetric eigendecomposition, negatives within tol clamped to 0."""
    H = (A + A.conj().T) / 2
    w, Q = np.linalg.eigh(H)
    if w.size and w[0] < -tol * max(1.0, abs(w[-1])):
        raise CertificateError(f"kernel is not positive: least eigenvalue {w[0]!r}")
    w = np.clip(w, 0, None)
    return (Q * np.sqrt(w)) @ Q.conj().T


def kernel_to_vectors(cert: PropACertificate, X: FiniteMetricSpace, S_target: int) -> PropACertificate:
    """Square root v of u, truncated to propagation S_target, columns normalised.

    eps' = max(eps, ||v^2 - w^2||) and the promised variation is 2 sqrt(6 eps' / (1 - 2 eps')).
    """
    if cert.variant not in KERNEL_VARIANTS:
        raise CertificateError("expected a kernel certificate")
    eps = cert.eps
    if not eps < 0.5:
        raise CertificateError("eps must be < 1/2")
    u = cert.payload.entries
    v = psd_sqrt(u, cert.payload.tol)
    w = np.where(X.dist <= S_target, v, 0)
    w = (w + w.conj().T) / 2
    err = float(np.linalg.norm(v @ v - w @ w, 2)) if X.n else 0.0
    eps_p = max(eps, err)
    if not eps_p < 0.5:
        raise CertificateError(f"S_target={S_target} too small: ||v^2 - w^2|| = {err!r}")
    Z = w.T.copy()  # zeta_x(z) = w(z, x)
    norms_sq = (np.abs(Z) ** 2).sum(axis=1)
    E = Z / np.sqrt(norms_sq)[:, None]
    if not np.iscomplexobj(u):
        E = E.real
    bound = 2 * math.sqrt(6 * eps_p / (1 - 2 * eps_p))
    var, pair = vector_variation(E, X, cert.R)
    meas = {
        "sq_error": err,
        "eps_prime": eps_p,
        "variation": var,
        "bound": bound,
        "bound_ok": var <= bound,
        "min_norm_sq": float(norms_sq.min(initial=1.0)),
        "norm_ok": bool((norms_sq >= 1 - 2 * eps_p).all()),
        "worst_pair": pair,
    }
    return PropACertificate("l2", {"R": cert.R, "eps": bound, "S": S_target}, E, meas)


# -- documents ---------------------------------------------------------------


def _dec(x) -> str:
    return repr(float(x))


def certificate_to_document(cert: PropACertificate, X: FiniteMetricSpace) -> dict:
    params = {k: (v if isinstance(v, int) else _dec(v)) for k, v in cert.params.items()}
    if cert.variant == "yu-sets":
        payload = {X.points[x]: sorted([X.points[y], k] for y, k in A) for x, A in enumerate(cert.payload)}
    elif cert.variant in KERNEL_VARIANTS:
        payload = cert.payload.to_document()["entries"]
    else:
        V = cert.payload
        cols = X.points if cert.variant != "hilbert" else [str(j) for j in range(V.shape[1])]
        if np.iscomplexobj(V):
            payload = {
                X.points[x]: {cols[j]: [_dec(V[x, j].real), _dec(V[x, j].imag)] for j in np.flatnonzero(V[x])}
                for x in range(V.shape[0])
            }
        else:
            payload = {X.points[x]: {cols[j]: _dec(V[x, j]) for j in np.flatnonzero(V[x])} for x in range(V.shape[0])}
    return {"variant": cert.variant, "params": params, "payload": payload}


def certificate_from_document(doc, X: FiniteMetricSpace) -> PropACertificate:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    if not isinstance(doc, Mapping) or {"variant", "params", "payload"} - set(doc):
        raise CertificateError("schema violation: need variant, params, payload")
    variant = doc["variant"]
    if variant not in VARIANTS:
        raise CertificateError(f"unknown variant {variant!r}")
    params = {}
    for k, v in doc["params"].items():
        if k not in ("R", "eps", "S", "delta"):
            raise CertificateError(f"schema violation: unknown param {k!r}")
        params[k] = int(v) if k in ("R", "S") else float(v)
    payload = doc["payload"]
    n = X.n
    try:
        if variant == "yu-sets":
            sets = [frozenset() for _ in range(n)]
            for pid, members in payload.items():
                sets[X.resolve(pid)] = frozenset((X.resolve(y), int(k)) for y, k in members)
            return PropACertificate(variant, params, sets)
        if variant in KERNEL_VARIANTS:
            from .roe import kernel_from_document

            return PropACertificate(variant, params, kernel_from_document({"entries": payload}, X))
        rows = [payload[p] for p in X.points]
    except (KeyError, TypeError, AttributeError) as exc:
        raise CertificateError(f"schema violation: {exc}") from None
    if variant == "hilbert":
        m = 1 + max((int(j) for r in rows for j in r), default=-1)
        resolve = int
    else:
        m = n
        resolve = X.resolve
    cplx = any(isinstance(val, list) for r in rows for val in r.values())
    V = np.zeros((n, m), dtype=complex if cplx else float)
    for x, r in enumerate(rows):
        for j, val in r.items():
            V[x, resolve(j)] = complex(float(val[0]), float(val[1])) if isinstance(val, list) else float(val)
    return PropACertificate(variant, params, V)
