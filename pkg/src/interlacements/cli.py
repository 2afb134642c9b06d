"""Command-line front end.

Each subcommand writes one table (CSV) or report (JSON) and prints a
one-line summary.  Settings come from flags, then from an optional
``key = value`` file given by ``--config``, then from built-in defaults.
Exit status: 0 on success, 1 on invalid input, 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .clusters import CrossingEstimate, fmt

WORKERS_ENV = "INTERLACEMENTS_WORKERS"
# settings that do not affect results and are left out of output metadata
_NOT_RECORDED = {"workers", "output", "config", "command"}


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


# --------------------------------------------------------------------------
# value parsing


def _ints(s: str) -> list[int]:
    try:
        return [int(v) for v in str(s).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def _floats(s: str) -> list[float]:
    try:
        vals = [float(v) for v in str(s).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("values must be finite")
    return vals


def _points(s: str) -> list[list[int]]:
    return [_ints(p) for p in str(s).split(";") if p.strip()]


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"expected a boolean, got {s!r}")


def _default_workers() -> int:
    v = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(v)
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer, got {v!r}")
    if n < 1:
        raise ValidationError(f"{WORKERS_ENV} must be positive")
    return n


def _num(v):
    """JSON-ready value with floats cut to 12 significant digits."""
    if isinstance(v, (bool, type(None), str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(fmt(v)) if math.isfinite(v) else str(v)
    if isinstance(v, dict):
        return {str(k): _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_num(x) for x in v]
    if dataclasses.is_dataclass(v):
        return _num(dataclasses.asdict(v))
    return str(v)


# --------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, dim=True, seed=False, replicas=None):
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--output", "-o", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if dim:
        p.add_argument("--dim", type=int, default=3)
    if seed:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default: ${WORKERS_ENV} or 1)")
        p.add_argument("--eps", type=float, default=1e-5,
                       help="return-bias tolerance of the trajectory kill rule")
    if replicas is not None:
        p.add_argument("--replicas", type=int, default=replicas)


def _renorm_args(p):
    p.add_argument("--L0", type=int, default=2)
    p.add_argument("--ell0", type=int, default=10)
    p.add_argument("--strict-mode", dest="strict_mode", default=False,
                   type=_bool, help="enforce the ell0 constraints of the multiscale argument")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="interlacements", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("green", help="lattice Green function values")
    _common(p)
    p.add_argument("--point", type=_points, help="points 'x,y,z;...'")
    p.add_argument("--radius", type=int, help="tabulate all |x|_inf <= radius")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--method", choices=("bessel_integral", "time_sum"), default="bessel_integral")

    p = sub.add_parser("cap", help="capacity and equilibrium measure")
    _common(p)
    p.add_argument("--ball", type=int, help="l-inf ball B(0, r)")
    p.add_argument("--segment", type=int, help="axis segment 0..L e_1")
    p.add_argument("--points", type=_points, help="explicit set 'x,y,z;...'")

    p = sub.add_parser("sample", help="interlacement samples on a window")
    _common(p, seed=True, replicas=1)
    p.add_argument("--u", type=_floats, required=False)
    p.add_argument("--radius", type=int, default=5)
    p.add_argument("--trajectories", type=_bool, default=False,
                   help="list every trajectory instead of per-level totals")

    p = sub.add_parser("curve", help="connectivity curves over L")
    _common(p, seed=True, replicas=200)
    p.add_argument("--u", type=_floats)
    p.add_argument("--L", type=_ints)
    p.add_argument("--geometry", choices=("annulus", "two_point", "sphere"), default="annulus")
    p.add_argument("--confinement", type=int, default=None)
    p.add_argument("--confidence", type=float, default=0.95)

    p = sub.add_parser("scan", help="exponent and cluster-fraction scan over u")
    _common(p, seed=True, replicas=100)
    p.add_argument("--u", type=_floats)
    p.add_argument("--L", type=_ints)
    p.add_argument("--threshold", type=float, default=0.1)

    p = sub.add_parser("renorm-geom", help="box hierarchy counts and geometry checks")
    _common(p)
    _renorm_args(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--c0", type=float, default=None,
                   help="tree-count constant (default: (max(h1, h2) / ell0^(d-1))^2)")

    p = sub.add_parser("renorm-estimate", help="estimate p_n(u) and check the descendant inclusion")
    _common(p, seed=True, replicas=200)
    _renorm_args(p)
    p.add_argument("--u", type=float)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--strategy", choices=("auto", "exhaustive", "random"), default="auto")
    p.add_argument("--restarts", type=int, default=64)

    p = sub.add_parser("certify", help="check starting conditions and propagate the bound recursion")
    _common(p)
    p.add_argument("--u0", type=float)
    p.add_argument("--r0", type=int)
    p.add_argument("--K0", type=float)
    p.add_argument("--L0", type=int, default=1)
    p.add_argument("--ell0", type=int, default=100)
    p.add_argument("--c0", type=float, default=None,
                   help="tree-count constant (default: (max(h1, h2) / ell0^(d-1))^2)")
    p.add_argument("--c1", type=float, default=None, help="sprinkling constant (default: c2)")
    p.add_argument("--c2", type=float, default=1.0,
                   help="hitting constant in the recursion (default: 1.0)")
    p.add_argument("--p0-high", dest="p0_high", type=float, default=None)
    p.add_argument("--p0-successes", dest="p0_successes", type=int, default=None)
    p.add_argument("--p0-trials", dest="p0_trials", type=int, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=30)
    p.add_argument("--allow-relaxed", dest="allow_relaxed", action="store_true", default=False)

    p = sub.add_parser("d3-check", help="segment lower bound and capacity growth")
    _common(p, seed=True, replicas=200)
    p.add_argument("--u", type=float, default=2.0)
    p.add_argument("--L", type=_ints)
    return ap


def _config_file(path: str) -> dict:
    out = {}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as e:
        raise ValidationError(f"cannot read config file: {e}")
    for i, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{i}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse(argv: Sequence[str]) -> argparse.Namespace:
    ap = build_parser()
    ns = ap.parse_args(argv)
    if ns.command is None:
        raise ValidationError("a subcommand is required")
    if getattr(ns, "config", None):
        sp = ap._subparsers._group_actions[0].choices[ns.command]
        dests = {a.dest: a for a in sp._actions}
        settings = _config_file(ns.config)
        unknown = sorted(set(settings) - set(dests) - {"config"} | (set(settings) & {"help"}))
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        defaults = {}
        for k, v in settings.items():
            a = dests[k]
            if isinstance(a, argparse._StoreTrueAction):
                defaults[k] = _bool(v)
            else:
                defaults[k] = v
        sp.set_defaults(**defaults)
        ns = ap.parse_args(argv)
    if hasattr(ns, "workers") and ns.workers is None:
        ns.workers = _default_workers()
    return ns


# --------------------------------------------------------------------------
# validation


def _need(ns, *names):
    missing = [n for n in names if getattr(ns, n, None) is None]
    if missing:
        raise ValidationError("missing required setting(s): " + ", ".join("--" + m for m in missing))


def validate(ns: argparse.Namespace) -> None:
    from .lattice import check_dim

    if hasattr(ns, "dim"):
        try:
            check_dim(ns.dim)
        except ValueError as e:
            raise ValidationError(str(e))
    for k in ("replicas", "workers"):
        if getattr(ns, k, 1) is not None and getattr(ns, k, 1) < 1:
            raise ValidationError(f"--{k} must be positive")
    if hasattr(ns, "eps") and not 0 < ns.eps < 1:
        raise ValidationError("--eps must lie in (0, 1)")
    c = ns.command
    if c == "green":
        if (ns.point is None) == (ns.radius is None):
            raise ValidationError("give exactly one of --point or --radius")
        if ns.point and any(len(x) != ns.dim for x in ns.point):
            raise ValidationError("point dimension mismatch")
        if ns.radius is not None and ns.radius < 1:
            raise ValidationError("--radius must be >= 1")
        if ns.tol <= 0:
            raise ValidationError("--tol must be positive")
    elif c == "cap":
        given = [v is not None for v in (ns.ball, ns.segment, ns.points)]
        if sum(given) != 1:
            raise ValidationError("give exactly one of --ball, --segment or --points")
        if ns.points and any(len(x) != ns.dim for x in ns.points):
            raise ValidationError("point dimension mismatch")
        if (ns.ball is not None and ns.ball < 0) or (ns.segment is not None and ns.segment < 0):
            raise ValidationError("radius must be nonnegative")
    elif c == "sample":
        _need(ns, "u")
        _levels(ns.u)
        if ns.radius < 0:
            raise ValidationError("--radius must be nonnegative")
    elif c in ("curve", "scan"):
        _need(ns, "u", "L")
        if min(ns.u) < 0:
            raise ValidationError("levels must be nonnegative")
        if min(ns.L) < 1:
            raise ValidationError("L values must be >= 1")
        if c == "scan":
            _levels(ns.u)
            if len(ns.L) < 3:
                raise ValidationError("scan needs at least 3 L values")
            if not 0 <= ns.threshold <= 1:
                raise ValidationError("--threshold must lie in [0, 1]")
        elif not 0 < ns.confidence < 1:
            raise ValidationError("--confidence must lie in (0, 1)")
        if c == "curve" and ns.confinement is not None:
            if ns.geometry != "two_point":
                raise ValidationError("--confinement applies to the two_point geometry only")
            if ns.confinement < max(ns.L):
                raise ValidationError("--confinement must be at least max L")
    elif c in ("renorm-geom", "renorm-estimate"):
        _hierarchy(ns)
        if ns.n not in (0, 1) and c == "renorm-geom":
            raise ValidationError("geometry checks run for n in {0, 1}")
        if c == "renorm-estimate":
            _need(ns, "u")
            if ns.u < 0:
                raise ValidationError("--u must be nonnegative")
            if ns.n < 0:
                raise ValidationError("--n must be nonnegative")
            if ns.n >= 1 and ns.replicas < 2:
                raise ValidationError("tree selection needs at least 2 replicas")
    elif c == "certify":
        _need(ns, "u0", "r0", "K0")
        if ns.K0 <= math.log(2):
            raise ValidationError("K0 must exceed log 2")
        if ns.ell0 < 2 or ns.ell0 % 2:
            raise ValidationError("--ell0 must be a positive even integer")
        if (ns.ell0 < 100 or ns.ell0 % 10) and not ns.allow_relaxed:
            raise ValidationError("ell0 violates strict mode (needs >= 100, multiple of 10); "
                                  "pass --allow-relaxed to proceed")
        have_hi = ns.p0_high is not None
        have_counts = ns.p0_successes is not None and ns.p0_trials is not None
        if have_hi == have_counts:
            raise ValidationError("give --p0-high or both --p0-successes and --p0-trials")
        if have_hi and not 0 <= ns.p0_high <= 1:
            raise ValidationError("--p0-high must lie in [0, 1]")
        if have_counts and not 0 <= ns.p0_successes <= ns.p0_trials:
            raise ValidationError("p0 counts must satisfy 0 <= successes <= trials")
        if ns.u0 <= 0 or ns.r0 < 1 or ns.L0 < 1 or ns.n_max < 0:
            raise ValidationError("need u0 > 0, r0 >= 1, L0 >= 1, n-max >= 0")
    elif c == "d3-check":
        _need(ns, "L")
        if ns.u < 0 or min(ns.L) < 1:
            raise ValidationError("need u >= 0 and L >= 1")


def _levels(u):
    if not u or u[0] < 0 or any(b <= a for a, b in zip(u, u[1:])):
        raise ValidationError("--u must be nonnegative and strictly increasing")


def _hierarchy(ns):
    from .renorm import ScaleHierarchy

    try:
        return ScaleHierarchy(ns.L0, ns.ell0, ns.dim, depth=max(getattr(ns, "n", 1), 1),
                              strict_mode=ns.strict_mode)
    except ValueError as e:
        raise ValidationError(str(e))


# --------------------------------------------------------------------------
# commands; each returns (summary, csv header, csv rows, json document)


def _cmd_green(ns):
    from .green import green_eval, green_table

    if ns.point is not None:
        rows, doc = [], []
        for x in ns.point:
            g = green_eval(ns.dim, x, ns.tol, ns.method)
            rows.append(f"{' '.join(map(str, x))},{fmt(g)}")
            doc.append({"point": x, "g": g})
        x0 = ",".join(map(str, ns.point[0]))
        summary = f"g({x0}) = {fmt(doc[0]['g'])}"
        return summary, "point,g", rows, {"values": doc}
    G = green_table(ns.dim, ns.radius, ns.tol)
    keys = sorted(G.values)
    rows = [f"{' '.join(map(str, k))},{fmt(G(k))}" for k in keys]
    doc = {"max_radius": ns.radius, "values": [{"point": list(k), "g": G(k)} for k in keys]}
    return f"tabulated {len(keys)} canonical displacements, g(0) = {fmt(G.g0())}", \
        "point,g", rows, doc


def _cmd_cap(ns):
    from .capacity import equilibrium_measure
    from .estimators import segment
    from .green import cached_table
    from .lattice import ball_array

    d = ns.dim
    if ns.ball is not None:
        K, what = ball_array((0,) * d, ns.ball), f"ball {ns.ball}"
    elif ns.segment is not None:
        K, what = segment(ns.segment, d), f"segment {ns.segment}"
    else:
        K, what = np.array(ns.points, dtype=np.int64), f"{len(ns.points)} points"
    ext = int(np.max(K.max(axis=0) - K.min(axis=0))) if len(K) else 0
    eq = equilibrium_measure(K, cached_table(d, max(ext, 1)))
    row = f"{what},{len(K)},{fmt(eq.capacity)},{fmt(eq.residual)},{eq.method}"
    doc = {"set": what, "size": len(K), "capacity": eq.capacity, "residual": eq.residual,
           "method": eq.method, "clamped": bool(eq.clamped)}
    return f"cap({what}) = {fmt(eq.capacity)}", "set,size,capacity,residual,method", [row], doc


class _SampleSummary:
    def __init__(self, trajectories: bool):
        self.trajectories = trajectories

    def __call__(self, s):
        occ = [int(s.occupied_mask(k).sum()) for k in range(s.n_levels)]
        lines = s.dump_lines() if self.trajectories else []
        return occ, [int(c) for c in np.cumsum(s.counts)], s.bias_budget, lines


def _cmd_sample(ns):
    from .lattice import Window
    from .sampler import make_sampler, map_replicas

    w = Window((0,) * ns.dim, ns.radius)
    prep = make_sampler(w, ns.u, seed=ns.seed, replica_count=ns.replicas,
                        return_bias_eps=ns.eps)
    res = map_replicas(prep, _SampleSummary(ns.trajectories), workers=ns.workers)
    rows, doc = [], []
    if ns.trajectories:
        header = "replica,level,start,step_count,visited_count"
        for r, (_, _, _, lines) in enumerate(res):
            rows += [f"{r},{ln}" for ln in lines]
    else:
        header = "replica,u,occupied,trajectories,bias_budget"
        for r, (occ, cnt, bias, _) in enumerate(res):
            for k, u in enumerate(ns.u):
                rows.append(f"{r},{fmt(u)},{occ[k]},{cnt[k]},{fmt(bias)}")
    for r, (occ, cnt, bias, lines) in enumerate(res):
        doc.append({"replica": r, "occupied": occ, "trajectories": cnt, "bias_budget": bias})
    top = res[0][0][-1]
    empty = all(o[0][-1] == 0 for o in res)
    summary = (f"{ns.replicas} replica(s) on B(0,{ns.radius}); occupied set "
               + ("empty" if empty else f"of replica 0 at u={fmt(ns.u[-1])}: {top} sites")
               + f"; kill radius {prep.kill_radius}")
    return summary, header, rows, {"kill_radius": prep.kill_radius, "cap": prep.cap,
                                   "replicas": doc}


def _fit_doc(curve):
    from .estimators import alpha_fit, stretched_fit

    out = {"L_range": [min(curve.Ls), max(curve.Ls)], "label": "finite-size proxy"}
    if len(curve.Ls) < 3:
        return out
    a = alpha_fit(curve)
    out.update(alpha_hat=a.alpha_hat, alpha_ci=list(a.alpha_ci), flagged=a.flagged,
               epsilon_surrogate=a.epsilon_surrogate())
    try:
        s = stretched_fit(curve)
        out.update(rho_hat=s.rho_hat, rho_ci=list(s.rho_ci), model_scores=s.model_scores,
                   excluded=s.excluded)
    except ValueError as e:
        out.update(rho_hat=None, stretched_fit_skipped=str(e))
    return out


def _cmd_curve(ns):
    from .estimators import ConnectivityCurve, connectivity_curve

    curves = connectivity_curve(ns.u, ns.geometry, ns.L, ns.replicas, ns.seed, ns.dim,
                                ns.workers, ns.confidence, ns.confinement,
                                return_bias_eps=ns.eps)
    rows = [r for c in curves for r in c.csv_rows()]
    doc = []
    for c in curves:
        doc.append({"u": c.u, "geometry": c.geometry, "L": c.Ls,
                    "p": [e.point_estimate for e in c.estimates],
                    "lo": [e.wilson_low for e in c.estimates],
                    "hi": [e.wilson_high for e in c.estimates],
                    "confinement": c.confinement, "fit": _fit_doc(c)})
    summary = f"{len(curves)} curve(s), {ns.geometry}, L={ns.L}, {ns.replicas} replicas per L"
    return summary, ConnectivityCurve.CSV_HEADER, rows, {"curves": doc}


def _cmd_scan(ns):
    from .estimators import ScanResult, ustar_scan

    res = ustar_scan(ns.u, ns.L, ns.replicas, ns.seed, ns.dim, ns.workers, ns.threshold,
                     return_bias_eps=ns.eps)
    doc = {"rows": [dataclasses.asdict(r) for r in res.rows],
           "u_star_proxy": res.u_star_proxy, "u_starstar_proxy": res.u_starstar_proxy,
           "u_starstar_raw": res.u_starstar_raw, "threshold": res.threshold,
           "L": res.Ls, "confinement": res.confinement, "note": res.note}
    summary = (f"u* proxy {res.u_star_proxy}, u** proxy {res.u_starstar_proxy} "
               f"({res.note})")
    return summary, ScanResult.CSV_HEADER, res.csv_rows(), doc


def _cmd_renorm_geom(ns):
    from .renorm import bound_check, tree_count, verify_descendant_geometry

    H = _hierarchy(ns)
    c0 = ns.c0 if ns.c0 is not None else H.default_c0()
    geo = verify_descendant_geometry(H.root(1), H) if ns.n >= 1 else {}
    doc = {"h1": H.h1, "h2": H.h2, "tree_count": tree_count(ns.n, H), "c0": c0,
           "bound_ok": bound_check(ns.n, H, c0), "rho": H.rho, "geometry": geo}
    row = ",".join(str(_num(doc[k])) for k in ("h1", "h2", "tree_count", "c0", "bound_ok"))
    ok = doc["bound_ok"] and all(v for v in geo.values() if isinstance(v, bool))
    summary = f"h1={H.h1} h2={H.h2} trees(n={ns.n})={doc['tree_count']} checks {'ok' if ok else 'FAILED'}"
    return summary, "h1,h2,tree_count,c0,bound_ok", [row], doc


class _StripTrajectories:
    def __call__(self, s):
        return dataclasses.replace(s, traj={})


def _cmd_renorm_estimate(ns):
    from .renorm import estimate_p_n, lemma21_witness
    from .sampler import make_sampler, map_replicas

    H = _hierarchy(ns)
    m = H.root(ns.n)
    w = H.window_for(m)
    prep = make_sampler(w, [ns.u], seed=ns.seed, replica_count=ns.replicas,
                        return_bias_eps=ns.eps)
    samples = map_replicas(prep, _StripTrajectories(), workers=ns.workers)
    est = estimate_p_n(ns.n, H, samples, 0, ns.strategy, ns.restarts, seed=ns.seed, u=ns.u)
    positives = failures = 0
    if ns.n >= 1:
        for s in samples:
            holds, tree = lemma21_witness(s, 0, m, H)
            positives += tree is not None
            failures += not holds
    e = est.estimate
    tree = {f"{k.level}:{','.join(map(str, k.index))}":
            [f"{c.level}:{','.join(map(str, c.index))}" for c in v] for k, v in est.tree.items()}
    doc = {"n": ns.n, "u": ns.u, "p_n": e.point_estimate, "lo": e.wilson_low,
           "hi": e.wilson_high, "successes": e.successes, "trials": e.trials,
           "strategy": est.strategy, "selection_trials": est.selection_trials, "tree": tree,
           "label": "lower estimate of the supremum over trees",
           "inclusion_positives": positives, "inclusion_failures": failures}
    row = (f"{ns.n},{fmt(ns.u)},{fmt(e.point_estimate)},{fmt(e.wilson_low)},"
           f"{fmt(e.wilson_high)},{e.successes},{e.trials},{est.strategy},{positives},{failures}")
    summary = (f"p_{ns.n}({fmt(ns.u)}) >= {fmt(e.point_estimate)} "
               f"[{fmt(e.wilson_low)}, {fmt(e.wilson_high)}]; inclusion failures {failures}")
    return (summary, "n,u,p,lo,hi,successes,trials,strategy,positives,failures", [row], doc,
            2 if failures else 0)


def _cmd_certify(ns):
    from .renorm import CertParams, ScaleHierarchy, certify

    H = ScaleHierarchy(ns.L0, ns.ell0, ns.dim, strict_mode=False)
    c0 = ns.c0 if ns.c0 is not None else H.default_c0()
    c1 = ns.c1 if ns.c1 is not None else ns.c2
    params = CertParams(ns.u0, ns.r0, ns.K0, c0, c1, ns.c2, ns.dim, ns.L0, ns.ell0)
    if ns.p0_high is not None:
        p0 = ns.p0_high
    else:
        p0 = CrossingEstimate(ns.p0_successes, ns.p0_trials).wilson_high
    res = certify(params, p0, ns.n_max, H, allow_relaxed=ns.allow_relaxed)
    doc = json.loads(res.to_json())
    rows = [f"{n},{fmt(res.u_n[n]) if n < len(res.u_n) else ''},{fmt(k)},{fmt(b)}"
            for n, (k, b) in enumerate(zip(res.K_n, res.log_bound_n))]
    summary = ("conditions hold; " if res.conditions_ok else "conditions FAIL; ") + \
        ", ".join(f"margin {k} = {fmt(v)}" for k, v in res.margins.items())
    return summary, "n,u_n,K_n,log_bound_n", rows, doc


def _cmd_d3_check(ns):
    from .estimators import d3_lower_check

    rows_ = d3_lower_check(ns.u, ns.L, ns.replicas if ns.dim == 3 else 0, ns.seed, ns.dim,
                           ns.workers, return_bias_eps=ns.eps)
    rows, doc = [], []
    for r in rows_:
        e = r.estimate
        p = e.point_estimate if e else float("nan")
        rows.append(",".join([str(r.L), fmt(r.cap), fmt(r.exact), fmt(p), fmt(r.sigma),
                              fmt(r.margin), str(r.ok), fmt(r.cap_log_ratio),
                              fmt(r.cap_linear_ratio)]))
        doc.append({"L": r.L, "cap": r.cap, "exact": r.exact, "p": p, "sigma": r.sigma,
                    "margin": r.margin, "ok": r.ok, "cap_log_ratio": r.cap_log_ratio,
                    "cap_linear_ratio": r.cap_linear_ratio})
    ok = all(r.ok for r in rows_)
    summary = f"segment lower bound {'holds' if ok else 'VIOLATED'} at u={fmt(ns.u)} for L={ns.L}"
    return (summary, "L,cap,exact,p,sigma,margin,ok,cap_log_ratio,cap_linear_ratio", rows,
            {"rows": doc}, 0 if ok else 2)


COMMANDS = {
    "green": _cmd_green, "cap": _cmd_cap, "sample": _cmd_sample, "curve": _cmd_curve,
    "scan": _cmd_scan, "renorm-geom": _cmd_renorm_geom,
    "renorm-estimate": _cmd_renorm_estimate, "certify": _cmd_certify,
    "d3-check": _cmd_d3_check,
}


# --------------------------------------------------------------------------
# output


def metadata(ns) -> dict:
    cfg = {k: v for k, v in sorted(vars(ns).items()) if k not in _NOT_RECORDED}
    return {"tool": "interlacements", "version": __version__, "command": ns.command,
            "config": _num(cfg)}


def render(ns, header: str, rows: list, doc) -> str:
    meta = metadata(ns)
    if ns.format == "json":
        return json.dumps({"meta": meta, "result": _num(doc)}, indent=2) + "\n"
    lines = [f"# tool = {meta['tool']} {meta['version']}", f"# command = {ns.command}"]
    lines += [f"# {k} = {json.dumps(v)}" for k, v in meta["config"].items()]
    lines.append(header)
    lines += rows
    return "\n".join(lines) + "\n"


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parse(argv)
        validate(ns)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        out = COMMANDS[ns.command](ns)
        summary, header, rows, doc = out[:4]
        status = out[4] if len(out) > 4 else 0
        text = render(ns, header, rows, doc)
        if ns.output:
            with open(ns.output, "w", encoding="utf-8") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
    except Exception as e:  # runtime failure: report and exit 2
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    print(summary, file=sys.stdout if ns.output else sys.stderr)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
