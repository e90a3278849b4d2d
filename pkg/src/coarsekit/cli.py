"""Command-line front end.  Every subcommand loads documents, calls one library
operation and emits a report.  Exit codes: 0 all checks pass, 1 a check fails,
2 usage error or malformed input."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import constructions as con
from . import group as grp
from . import kappa as kap
from . import mspace as ms
from . import propa as pa
from . import ptrans as pt
from . import roe
from .report import Report, emit_report


class InputError(Exception):
    """Malformed or unreadable input; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"usage: {message}")


# -- document loading ----------------------------------------------------------


def _read(path, report: Report, name: str):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    report.inputs[name] = hashlib.sha256(raw).hexdigest()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not JSON ({exc})") from None


def _guard(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(str(exc).strip("'\"")) from None


def _space(args, report, name="space"):
    path = getattr(args, name)
    if path is None:
        raise InputError(f"--{name} is required")
    return _guard(ms.load_space, _read(path, report, name))


def _group(args, report):
    if args.group is None:
        raise InputError("--group is required")
    return _guard(grp.group_from_table, _read(args.group, report, "group"))


def _kernel(path, report, name, X=None, tol=1e-9):
    doc = _read(path, report, name)
    return _guard(roe.kernel_from_document, doc, X, tol)


def _map(path, report, name, X, Y):
    """First entry of a map document {"maps": [{"domain": [...], "values": [...]}]}."""
    doc = _read(path, report, name)
    try:
        m = doc["maps"][0]
        dom, vals = m["domain"], m["values"]
    except (KeyError, IndexError, TypeError):
        raise InputError(f"{path}: schema violation: need maps[0].domain and maps[0].values") from None
    if len(dom) != len(vals) or sorted(dom) != sorted(X.points):
        raise InputError(f"{path}: map domain must list every point of the space once")
    lookup = dict(zip(dom, vals))
    return _guard(ms.resolve_map, [lookup[p] for p in X.points], X, Y)


def _radii(text):
    try:
        out = [int(r) for r in str(text).split(",") if r.strip()]
    except ValueError:
        raise InputError(f"bad radius list {text!r}") from None
    if not out or any(r <= 0 for r in out):
        raise InputError("radii must be positive integers")
    return out


def _chart_verdicts(report: Report, rep: pt.AtlasReport, want_free=False, want_control=False):
    for c in rep.charts:
        w = c.witnesses
        report.check(f"R={c.R}:axiom1", c.axiom1, w.get("uncovered_pair"))
        report.check(f"R={c.R}:axiom2", c.axiom2, {"k": c.k})
        report.check(f"R={c.R}:axiom3", c.axiom3, w.get("axiom3_missing"))
        report.check(f"R={c.R}:cotranslations", c.cotranslations_ok, w.get("cotranslation_violation"))
        if want_free:
            report.check(f"R={c.R}:free", c.free, {"k": c.k})
        if want_control:
            report.check(f"R={c.R}:globally_controlled", c.globally_controlled, w.get("uncontrolled_orbit"))
        report.measure(f"R={c.R}:k", c.k)
        report.measure(f"R={c.R}:free", c.free)
        report.measure(f"R={c.R}:globally_controlled", c.globally_controlled)


# -- commands ----------------------------------------------------------------------


def cmd_space_validate(args, report):
    doc = _read(args.space, report, "space")
    try:
        X = ms.load_space(doc)
    except ms.MetricError as exc:
        if str(exc).startswith("schema violation"):
            raise InputError(str(exc)) from None
        report.check("metric", False, str(exc))
        return
    report.check("metric", True)
    report.measure("points", X.n)
    report.measure("diameter", X.diameter)


def cmd_space_fin(args, report):
    X = _space(args, report)
    F = _guard(ms.fin_space, X, args.K)
    report.output = F.to_document()
    report.measure("points", F.n)
    report.measure("blocks", args.K)


def cmd_separate(args, report):
    X = _space(args, report)
    colors = ms.greedy_separation(X, args.R)
    c = np.asarray(colors)
    same = (c[:, None] == c[None, :]) & ~np.eye(X.n, dtype=bool) & (X.dist <= args.R)
    bad = np.argwhere(same)
    report.check("separated", not len(bad), [X.points[i] for i in bad[0]] if len(bad) else None)
    report.check("color_count", c.max(initial=0) <= X.max_ball_size(args.R), int(c.max(initial=0)))
    report.measure("colors", int(c.max(initial=0)))
    report.output = dict(zip(X.points, colors))


def cmd_group_validate(args, report):
    doc = _read(args.group, report, "group")
    try:
        G = grp.group_from_table(doc)
    except grp.GroupError as exc:
        if str(exc).startswith("schema violation"):
            raise InputError(str(exc)) from None
        report.check("group", False, str(exc))
        return
    report.check("group", True)
    report.measure("order", G.order)


def cmd_group_metric(args, report):
    G = _group(args, report)
    M = grp.word_metric(G)
    D, T = M.dist, G.table
    # d(kg, kh) == d(g, h) for all k
    shifted = D[T[:, :, None], T[:, None, :]]
    bad = np.argwhere(shifted != D[None])
    report.check("left_invariant", not len(bad), bad[0].tolist() if len(bad) else None)
    report.measure("diameter", M.diameter)
    report.output = M.to_document()


def cmd_atlas_build(args, report):
    radii = _radii(args.radii)
    if args.method == "canonical":
        G = _group(args, report)
        X = G.metric
        atlas = grp.canonical_atlas(G, radii)
    elif args.method == "coloring":
        X = _space(args, report)
        atlas = pt.build_atlas_coloring(X, radii)
    else:
        X = _space(args, report)
        G = _group(args, report)
        if args.phi is None:
            raise InputError("--phi is required for the pullback method")
        f = _map(args.phi, report, "phi", X, G.metric)
        atlas = _guard(pt.pullback_atlas, X, f, G, radii)
    rep = pt.verify_atlas(X, atlas)
    _chart_verdicts(report, rep, want_free=args.method != "coloring", want_control=args.method != "coloring")
    report.output = pt.atlas_document(atlas)


def cmd_atlas_verify(args, report):
    X = _space(args, report)
    atlas = _guard(pt.load_atlas, _read(args.atlas, report, "atlas"), X)
    rep = _guard(pt.verify_atlas, X, atlas)
    _chart_verdicts(report, rep, want_free=args.require_free, want_control=args.require_control)


def cmd_kappa(args, report):
    X = _space(args, report)
    caps = kap.KappaCaps(exact_size=args.exact_size)
    mode = "bound" if args.bound else "exact"
    try:
        res = kap.kappa_search(X, args.R, caps, mode)
    except kap.KappaCapExceeded as exc:
        report.check("within_caps", False, str(exc))
        return
    report.check("witness_verified", pt.verify_chart(X, res.witness).ok, "witness chart fails the axioms")
    report.measure("lower", res.lower)
    report.measure("upper", res.upper)
    report.measure("exact", res.exact)
    if res.exact:
        report.measure("k", res.lower)
    report.output = pt.chart_to_document(res.witness)


def cmd_roe_propagation(args, report):
    X = _space(args, report)
    T = _kernel(args.kernel, report, "kernel", X, args.tol)
    report.measure("propagation", roe.propagation(T))


def cmd_roe_psd(args, report):
    X = _space(args, report) if args.space else None
    u = _kernel(args.kernel, report, "kernel", X, args.tol)
    if not u.hermitian:
        raise InputError("kernel is not hermitian within tol")
    r = roe.positive_type_check(u)
    report.check("positive", r.ok, r.least_eigenvalue)
    report.measure("least_eigenvalue", r.least_eigenvalue)
    report.measure("residual", r.residual)


def cmd_roe_schur(args, report):
    X = _space(args, report) if args.space else None
    u = _kernel(args.u, report, "u", X, args.tol)
    T = _kernel(args.kernel, report, "kernel", X, args.tol)
    out = _guard(roe.schur_multiply, u, T)
    if args.eps is not None:
        e = roe.schur_error(u, T, args.eps)
        near = np.abs(1 - u.entries)[np.abs(T.entries) > 0].max(initial=0.0)
        if near <= args.eps:
            report.check("entrywise_bound", e.entrywise_ok, e.worst_ratio)
        report.measure("worst_ratio", e.worst_ratio)
        report.measure("operator_error", e.operator_error)
        report.measure("operator_norm", e.operator_norm)
    if u.hermitian and T.hermitian:
        pu, pT = roe.positive_type_check(u), roe.positive_type_check(T)
        if pu.ok and pT.ok:
            po = roe.positive_type_check(out)
            report.check("product_positive", po.ok, po.least_eigenvalue)
            report.measure("least_eigenvalue", po.least_eigenvalue)
    report.output = out.to_document()


def cmd_roe_algebra_dim(args, report):
    if args.group:
        G = _group(args, report)
        R = G.metric.diameter + 1
        gens = [roe.translation_isometry(t, G.order) for t in grp.canonical_atlas(G, [R])[R].translations]
        expected = G.order
    else:
        gens = [_kernel(p, report, f"kernel{i}", None, args.tol) for i, p in enumerate(args.kernels or [])]
        if not gens:
            raise InputError("give --group or --kernels")
        expected = None
    dim = _guard(roe.algebra_dimension, gens, args.cap, args.tol)
    report.measure("dimension", dim)
    if expected is not None:
        report.check("dimension_equals_order", dim == expected, {"dimension": dim, "order": expected})


def cmd_roe_claim(args, report):
    X = _space(args, report)
    atlas = _guard(pt.load_atlas, _read(args.atlas, report, "atlas"), X)
    for chart in atlas:
        try:
            c = roe.claim_matrix(X, chart)
        except roe.KernelError as exc:
            report.check(f"R={chart.R}:free", False, str(exc))
            continue
        report.check(f"R={chart.R}:positive", c.least_eigenvalue >= -args.tol, c.least_eigenvalue)
        report.check(f"R={chart.R}:entries", c.entries_ok, c.witnesses.get("entry"))
        report.check(f"R={chart.R}:orbits", c.orbits_ok, c.witnesses.get("orbit"))
        report.measure(f"R={chart.R}:least_eigenvalue", c.least_eigenvalue)
        report.measure(f"R={chart.R}:distinct_blocks", c.distinct_blocks)


def _cert_space(args, report, doc):
    if args.space:
        return _space(args, report)
    ref = doc.get("space") if isinstance(doc, dict) else None
    if isinstance(ref, dict):
        return _guard(ms.load_space, ref)
    if isinstance(ref, str):
        base = Path(args.cert_path).parent
        return _guard(ms.load_space, _read(base / ref, report, "space"))
    raise InputError("no space: pass --space or embed a space reference")


def _cert_report(report, rep: pa.CertificateReport, prefix=""):
    for name, ok in rep.checks.items():
        report.check(prefix + name, ok, rep.witnesses.get(name, rep.measurements.get(name)))
    for name, v in rep.measurements.items():
        report.measure(prefix + name, v)


def cmd_propa_verify(args, report):
    args.cert_path = args.cert
    doc = _read(args.cert, report, "cert")
    X = _cert_space(args, report, doc)
    cert = _guard(pa.certificate_from_document, doc, X)
    _cert_report(report, _guard(pa.verify_certificate, cert, X, args.tol))


_CONVERSIONS = {
    ("yu-sets", "l1"): lambda c, X, a: pa.yusets_to_l1(c, X),
    ("l1", "l2"): lambda c, X, a: pa.l1_to_l2(c, X),
    ("l2-delta-weak", "l2"): lambda c, X, a: pa.truncate_normalize(c, X),
    ("l2-delta", "l2"): lambda c, X, a: pa.truncate_normalize(c, X),
    ("l2", "kernel-real"): lambda c, X, a: pa.vectors_to_kernel(c, X, a.tol),
    ("hilbert", "kernel-real"): lambda c, X, a: pa.vectors_to_kernel(c, X, a.tol),
    ("kernel-roe", "l2"): lambda c, X, a: pa.kernel_to_vectors(c, X, a.S),
    ("kernel-real", "l2"): lambda c, X, a: pa.kernel_to_vectors(c, X, a.S),
}


def cmd_propa_convert(args, report):
    args.cert_path = args.input
    doc = _read(args.input, report, "in")
    X = _cert_space(args, report, doc)
    cert = _guard(pa.certificate_from_document, doc, X)
    if cert.variant != args.from_:
        raise InputError(f"input certificate is {cert.variant}, not {args.from_}")
    key = (args.from_, args.to)
    if key in _CONVERSIONS:
        if args.from_.startswith("kernel") and args.S is None:
            raise InputError("--S is required for kernel to vector conversion")
        out = _guard(_CONVERSIONS[key], cert, X, args)
    else:
        extra = {"delta": args.delta} if args.delta is not None else {}
        out = _guard(pa.as_variant, cert, args.to, **extra)
    for name, v in out.measurements.items():
        if name.endswith("_ok"):
            report.check(name, v, out.measurements)
        else:
            report.measure(name, v)
    _cert_report(report, pa.verify_certificate(out, X, args.tol), prefix="output:")
    report.output = pa.certificate_to_document(out, X)


def cmd_propa_ball_cert(args, report):
    X = _space(args, report)
    cert = _guard(pa.ball_certificate, X, args.S, args.R, args.eps)
    _cert_report(report, pa.verify_certificate(cert, X, args.tol))
    report.output = pa.certificate_to_document(cert, X)


def cmd_telescope_build(args, report):
    X = _space(args, report)
    G = _guard(con.telescope_graph, X, args.i_max)
    deg = G.degrees()
    report.check("max_degree", deg.max(initial=0) <= 3, G.vertices[int(np.argmax(deg))] if deg.size else None)
    report.measure("vertices", len(G.vertices))
    report.measure("edges", len(G.edges))
    report.output = G.to_document()


def cmd_telescope_check(args, report):
    X = _space(args, report)
    i = args.i if args.i is not None else args.R + 1
    G = _guard(con.telescope_graph, X, args.i_max if args.i_max is not None else i)
    r = _guard(con.telescope_check, X, G, args.R, i)
    report.check("degree", r.degree_ok, r.counterexamples.get("degree"))
    report.check("forward", r.forward_ok, r.counterexamples.get("forward"))
    report.check("backward", r.backward_ok, r.counterexamples.get("backward"))
    for name in ("i", "N", "forward_bound", "backward_bound", "forward_max", "backward_max", "max_degree"):
        report.measure(name, getattr(r, name))


def cmd_gammau(args, report):
    U = _guard(con.gamma_u, args.n_max)
    report.measure("points", U.n)
    report.measure("components", len(con.bounded_degree_graphs(args.n_max)))
    report.output = U.to_document()


def cmd_morita_interleave(args, report):
    X = _space(args, report)
    Y = _space(args, report, "target")
    f = _map(args.map, report, "map", X, Y)
    I = _guard(con.morita_interleave, f, X, Y, args.J)
    report.check("injective", I.injective, "two window points share an image")
    report.check("image", I.image_ok, "image differs from the residue-class prediction")
    report.measure("N", {Y.points[y]: int(v) for y, v in enumerate(I.N)})
    report.measure("pi", {X.points[x]: int(v) for x, v in enumerate(I.pi)})
    report.measure("ranges", {Y.points[y]: list(r) for y, r in I.ranges.items()})


def cmd_morita_conjugate(args, report):
    X = _space(args, report)
    Y = _space(args, report, "target")
    f = _map(args.map, report, "map", X, Y)
    T = _kernel(args.kernel, report, "kernel", X, args.tol)
    try:
        idx = [int(v) for v in args.indices.split(",")]
    except ValueError:
        raise InputError("--indices must be n,i,n',i'") from None
    if len(idx) != 4:
        raise InputError("--indices must be n,i,n',i'")
    r = _guard(con.morita_conjugation_check, f, X, Y, T, idx)
    report.check("propagation_bound", r.ok, {"propagation": r.propagation, "bound": r.bound})
    report.measure("propagation", r.propagation)
    report.measure("bound", r.bound)
    report.measure("tight_bound", r.tight_bound)


def cmd_limit_embed(args, report):
    G = _group(args, report)
    doc = _read(args.family, report, "family")
    try:
        family = []
        for m in doc["maps"]:
            vals = [G.elements.index(v) if isinstance(v, str) else int(v) for v in m["values"]]
            family.append(dict(zip(m["domain"], vals)))
    except (KeyError, TypeError, ValueError):
        raise InputError("schema violation: need maps[].domain and maps[].values") from None
    try:
        L = con.limit_embedding(family, G, args.tail)
    except con.NonStabilizingPair as exc:
        report.check("stabilizes", False, {"pair": list(exc.pair), "values": exc.values})
        return
    except con.ConstructionError as exc:
        raise InputError(str(exc)) from None
    report.check("stabilizes", True)
    for name, ok in L.checks.items():
        report.check(name, ok)
    report.output = {
        "base": L.base,
        "psi": {p: G.elements[int(v)] for p, v in zip(L.points, L.psi)},
    }


def cmd_glue(args, report):
    X = _space(args, report)
    doc = _read(args.blocks, report, "blocks")
    try:
        blocks = [(b["points"], roe.kernel_from_document(b["kernel"], None, args.tol)) for b in doc["blocks"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"schema violation: {exc}") from None
    v = _guard(con.glue_local_kernel, X, blocks, args.R)
    psd = roe.positive_type_check(v)
    report.check("positive", psd.ok, psd.least_eigenvalue)
    var = roe.max_kernel_variation(v, args.R)
    if args.eps is not None:
        report.check("variation", var < args.eps, var)
    idx = [[X.resolve(p) for p in b] for b, _ in blocks]
    report.measure("fused_blocks", con.fused_blocks(X, idx, args.R))
    report.measure("variation", var)
    report.measure("least_eigenvalue", psd.least_eigenvalue)
    report.output = v.to_document()


# -- parser ------------------------------------------------------------------------


def _common(p):
    p.add_argument("--space")
    p.add_argument("--out")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coarsekit", description="Finite coarse-geometry toolkit")
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def leaf(subs, name, fn, **kw):
        p = subs.add_parser(name, **kw)
        _common(p)
        p.set_defaults(fn=fn, name=name)
        return p

    def group_of(name):
        p = sub.add_parser(name)
        return p.add_subparsers(dest="sub", required=True, parser_class=_Parser)

    s = group_of("space")
    leaf(s, "validate", cmd_space_validate)
    leaf(s, "fin", cmd_space_fin).add_argument("--K", type=int, required=True)

    leaf(sub, "separate", cmd_separate).add_argument("--R", type=int, required=True)

    g = group_of("group")
    for name, fn in (("validate", cmd_group_validate), ("metric", cmd_group_metric)):
        leaf(g, name, fn).add_argument("--group", required=True)

    a = group_of("atlas")
    p = leaf(a, "build", cmd_atlas_build)
    p.add_argument("--method", choices=["coloring", "canonical", "pullback"], required=True)
    p.add_argument("--radii", required=True)
    p.add_argument("--group")
    p.add_argument("--phi")
    p = leaf(a, "verify", cmd_atlas_verify)
    p.add_argument("--atlas", required=True)
    p.add_argument("--require-free", action="store_true")
    p.add_argument("--require-control", action="store_true")

    p = leaf(sub, "kappa", cmd_kappa)
    p.add_argument("--R", type=int, required=True)
    m = p.add_mutually_exclusive_group()
    m.add_argument("--exact", action="store_true")
    m.add_argument("--bound", action="store_true")
    p.add_argument("--exact-size", type=int, default=kap.KappaCaps().exact_size)

    r = group_of("roe")
    leaf(r, "propagation", cmd_roe_propagation).add_argument("--kernel", required=True)
    leaf(r, "psd", cmd_roe_psd).add_argument("--kernel", required=True)
    p = leaf(r, "schur", cmd_roe_schur)
    p.add_argument("--u", required=True)
    p.add_argument("--kernel", required=True)
    p.add_argument("--eps", type=float)
    p = leaf(r, "algebra-dim", cmd_roe_algebra_dim)
    p.add_argument("--group")
    p.add_argument("--kernels", nargs="+")
    p.add_argument("--cap", type=int, default=64)
    leaf(r, "claim", cmd_roe_claim).add_argument("--atlas", required=True)

    q = group_of("propa")
    leaf(q, "verify", cmd_propa_verify).add_argument("--cert", required=True)
    p = leaf(q, "convert", cmd_propa_convert)
    p.add_argument("--from", dest="from_", choices=pa.VARIANTS, required=True)
    p.add_argument("--to", choices=pa.VARIANTS, required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--S", type=int)
    p.add_argument("--delta", type=float)
    p = leaf(q, "ball-cert", cmd_propa_ball_cert)
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--R", type=int, default=1)
    p.add_argument("--eps", type=float)

    t = group_of("telescope")
    leaf(t, "build", cmd_telescope_build).add_argument("--i-max", type=int, required=True)
    p = leaf(t, "check", cmd_telescope_check)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--i", type=int)
    p.add_argument("--i-max", type=int)

    leaf(sub, "gammau", cmd_gammau).add_argument("--n-max", type=int, required=True)

    mo = group_of("morita")
    p = leaf(mo, "interleave", cmd_morita_interleave)
    p.add_argument("--target", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--J", type=int, required=True)
    p = leaf(mo, "conjugate", cmd_morita_conjugate)
    p.add_argument("--target", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--kernel", required=True)
    p.add_argument("--indices", required=True)

    p = leaf(sub, "limit-embed", cmd_limit_embed)
    p.add_argument("--group", required=True)
    p.add_argument("--family", required=True)
    p.add_argument("--tail", type=int, default=2)

    p = leaf(sub, "glue", cmd_glue)
    p.add_argument("--blocks", required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--eps", type=float)
    return parser


def run(argv, stdout=None) -> int:
    stdout = stdout or sys.stdout
    report = Report()
    out_path = None
    try:
        args = build_parser().parse_args(list(argv))
        out_path = args.out
        report.command = " ".join(v for v in (args.cmd, getattr(args, "sub", None)) if v)
        if args.tol < 0:
            raise InputError("--tol must be non-negative")
        args.fn(args, report)
        code = 0 if report.ok else 1
    except InputError as exc:
        report.check("input", False, str(exc))
        code = 2
    try:
        emit_report(report, out_path, stdout)
    except OSError as exc:
        print(f"coarsekit: cannot write report: {exc.strerror}", file=sys.stderr)
        return 2
    return code


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
