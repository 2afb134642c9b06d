"""Connectivity curves, decay-exponent fits and critical-level proxies.

All curves for a list of levels come from one set of coupled samples, so
they are ordered in u sample by sample.  Exponents are finite-size
proxies: slopes over the supplied L-range, labelled as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .clusters import CrossingEstimate, ball_to_sphere, fmt, label_mask, wilson_upper
from .lattice import Window, check_dim, unit
from .sampler import make_sampler, map_replicas

GEOMETRIES = ("annulus", "two_point", "sphere")


def event_window(geometry: str, L: int, d: int, confinement: int | None = None) -> Window:
    """Window on which the event is evaluated.

    annulus  B(0,L) <-> S(0,2L): paths may be confined to B(0,2L) exactly.
    sphere   0 <-> S(0,L): confined to B(0,L), again exactly.
    two_point 0 <-> L e_1: confined to B(0, confinement), default 2L.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    o = (0,) * d
    if geometry == "annulus":
        return Window(o, 2 * L)
    if geometry == "sphere":
        return Window(o, L)
    if geometry == "two_point":
        r = 2 * L if confinement is None else confinement
        if r < L:
            raise ValueError("confinement radius must be at least L")
        return Window(o, r)
    raise ValueError(f"unknown geometry {geometry!r}")


class EventFn:
    """Per-sample indicators of one event at every level (picklable)."""

    def __init__(self, geometry: str, L: int, cluster_fraction: bool = False):
        self.geometry = geometry
        self.L = L
        self.cluster_fraction = cluster_fraction

    def __call__(self, sample):
        w = sample.window
        ev = np.zeros(sample.n_levels, dtype=bool)
        frac = np.zeros(sample.n_levels)
        for k in range(sample.n_levels):
            vac = sample.vacant_mask(k)
            if self.geometry == "annulus":
                ev[k] = ball_to_sphere(vac, w, self.L, 2 * self.L)
            elif self.geometry == "sphere":
                ev[k] = ball_to_sphere(vac, w, 0, self.L)
            else:
                c = w.radius
                o = (c,) * w.dim
                x = (c + self.L,) + (c,) * (w.dim - 1)
                if vac[o] and vac[x]:
                    lab = label_mask(vac)
                    ev[k] = lab[o] == lab[x]
            if self.cluster_fraction:
                lab = label_mask(vac).reshape(-1)
                lab = lab[lab >= 0]
                frac[k] = np.bincount(lab).max() / vac.size if lab.size else 0.0
        return ev, frac


@dataclass
class ConnectivityCurve:
    u: float
    geometry: str
    Ls: list
    estimates: list
    confinement: list
    replicas: int = 0
    seed: int = 0

    def p(self) -> np.ndarray:
        return np.array([e.point_estimate for e in self.estimates])

    CSV_HEADER = "u,L,p,lo,hi,confinement"

    def csv_rows(self) -> list[str]:
        return [
            f"{fmt(self.u)},{L},{fmt(e.point_estimate)},{fmt(e.wilson_low)},"
            f"{fmt(e.wilson_high)},{r}"
            for L, e, r in zip(self.Ls, self.estimates, self.confinement)
        ]


def _level_grid(us: Sequence[float]):
    """Sorted distinct levels and the index of each requested u in that grid."""
    grid = sorted(set(float(u) for u in us))
    if grid[0] < 0:
        raise ValueError("levels must be nonnegative")
    return grid, [grid.index(float(u)) for u in us]


def sample_events(geometry: str, L: int, us: Sequence[float], replicas: int, seed: int,
                  d: int = 3, workers: int = 1, confinement: int | None = None,
                  cluster_fraction: bool = False, stream: int = 0, **sampler_kw):
    """Event indicators (replicas x levels) and largest-cluster fractions."""
    grid, idx = _level_grid(us)
    w = event_window(geometry, L, d, confinement)
    prep = make_sampler(w, grid, seed=seed, replica_count=replicas, stream=stream, **sampler_kw)
    res = map_replicas(prep, EventFn(geometry, L, cluster_fraction), workers=workers)
    ev = np.array([r[0] for r in res]).reshape(replicas, len(grid))[:, idx]
    fr = np.array([r[1] for r in res]).reshape(replicas, len(grid))[:, idx]
    return ev, fr, w


def connectivity_curve(us: float | Sequence[float], geometry: str, Ls: Sequence[int],
                       replicas: int, seed: int = 0, d: int = 3, workers: int = 1,
                       confidence: float = 0.95, confinement: int | None = None,
                       **sampler_kw):
    """Connectivity estimates over L for one or several levels.

    Returns one :class:`ConnectivityCurve` per level (a single curve if
    ``us`` is a number).  Each L uses its own window and replica stream;
    all levels at a given L share the coupled samples.
    """
    check_dim(d)
    if geometry not in GEOMETRIES:
        raise ValueError(f"unknown geometry {geometry!r}")
    single = np.isscalar(us)
    ulist = [float(us)] if single else [float(u) for u in us]
    per_u = [[] for _ in ulist]
    conf = []
    for j, L in enumerate(Ls):
        ev, _, w = sample_events(geometry, int(L), ulist, replicas, seed, d, workers,
                                 confinement, stream=j, **sampler_kw)
        conf.append(w.radius)
        for k, u in enumerate(ulist):
            per_u[k].append(CrossingEstimate(int(ev[:, k].sum()), replicas, u, geometry,
                                             int(L), confidence))
    curves = [ConnectivityCurve(u, geometry, [int(L) for L in Ls], per_u[k], conf,
                                replicas, seed) for k, u in enumerate(ulist)]
    return curves[0] if single else curves


def synthetic_curve(Ls: Sequence[int], p: Callable[[float], float], trials: int = 10 ** 12,
                    geometry: str = "synthetic") -> ConnectivityCurve:
    """A curve whose estimates sit (up to rounding) on the given p(L)."""
    est = [CrossingEstimate(int(round(p(L) * trials)), trials, float("nan"), geometry, int(L))
           for L in Ls]
    return ConnectivityCurve(float("nan"), geometry, [int(L) for L in Ls], est,
                             [0] * len(Ls))


# --------------------------------------------------------------------------
# fits


@dataclass
class ExponentFit:
    alpha_hat: float = float("nan")
    alpha_ci: tuple = (float("nan"), float("nan"))
    rho_hat: float = float("nan")
    rho_ci: tuple = (float("nan"), float("nan"))
    model_scores: dict = field(default_factory=dict)
    Ls: list = field(default_factory=list)
    flagged: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    @property
    def L_range(self):
        return (min(self.Ls), max(self.Ls)) if self.Ls else None

    def epsilon_surrogate(self) -> float | None:
        """An exponent strictly between 0 and the lower CI of alpha, if positive."""
        lo = self.alpha_ci[0]
        return 0.5 * lo if lo > 0 else None


def _slope_weights(x: np.ndarray) -> np.ndarray:
    xc = x - x.mean()
    return xc / (xc @ xc)


def _endpoint_slopes(x, y_lo, y_hi):
    """Extreme regression slopes over y_i in [y_lo_i, y_hi_i]."""
    w = _slope_weights(x)
    with np.errstate(invalid="ignore"):
        lo = np.sum(np.where(w > 0, y_lo, y_hi) * w)
        hi = np.sum(np.where(w > 0, y_hi, y_lo) * w)
    return float(lo), float(hi)


def _neglog(p):
    with np.errstate(divide="ignore"):
        return -np.log(np.asarray(p, dtype=float))


def alpha_fit(curve: ConnectivityCurve) -> ExponentFit:
    """Slope of -log p against log L, with a CI from endpoint regressions.

    A zero-success cell enters through its one-sided Wilson upper bound,
    which under-states -log p there; such cells are flagged.
    """
    if len(curve.Ls) < 3:
        raise ValueError("need at least 3 L values")
    x = np.log(np.asarray(curve.Ls, dtype=float))
    p = curve.p()
    hi = np.array([e.wilson_high for e in curve.estimates])
    lo = np.array([e.wilson_low for e in curve.estimates])
    zero = np.array([e.successes == 0 for e in curve.estimates])
    flagged = [int(L) for L, z in zip(curve.Ls, zero) if z]
    pz = np.array([wilson_upper(0, e.trials, e.confidence) if z else pp
                   for e, z, pp in zip(curve.estimates, zero, p)])
    y = _neglog(pz)
    w = _slope_weights(x)
    a_hat = float(w @ y)
    a_lo, a_hi = _endpoint_slopes(x, _neglog(hi), _neglog(lo))
    if zero.all():
        a_hat, a_hi = float("nan"), float("inf")
    return ExponentFit(alpha_hat=a_hat, alpha_ci=(a_lo, a_hi), Ls=list(curve.Ls),
                       flagged=flagged)


def _loglog(p):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(_neglog(p))


def stretched_fit(curve: ConnectivityCurve) -> ExponentFit:
    """Slope of log(-log p) against log L and residuals of the two decay models.

    Cells with p in {0, 1} are excluded and listed.  ``model_scores`` holds
    residual sums of squares of -log p for the polynomial model
    a + alpha log L and the stretched model b L^rho (lower is better).
    """
    p = curve.p()
    keep = (p > 0) & (p < 1)
    excluded = [int(L) for L, k in zip(curve.Ls, keep) if not k]
    if keep.sum() < 3:
        raise ValueError("need at least 3 estimates strictly inside (0, 1)")
    Ls = np.asarray(curve.Ls, dtype=float)[keep]
    ests = [e for e, k in zip(curve.estimates, keep) if k]
    x = np.log(Ls)
    y = _loglog(p[keep])
    w = _slope_weights(x)
    rho = float(w @ y)
    # log(-log p) decreases in p
    y_hi = _loglog([e.wilson_low for e in ests])
    y_lo = _loglog([e.wilson_high for e in ests])
    r_lo, r_hi = _endpoint_slopes(x, y_lo, y_hi)
    v = _neglog(p[keep])
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    rss_poly = float(np.sum((A @ coef - v) ** 2))
    b = math.exp(float(y.mean() - rho * x.mean()))
    rss_str = float(np.sum((b * Ls ** rho - v) ** 2))
    a = alpha_fit(curve) if len(curve.Ls) >= 3 else ExponentFit()
    return ExponentFit(alpha_hat=a.alpha_hat, alpha_ci=a.alpha_ci, rho_hat=rho,
                       rho_ci=(r_lo, r_hi),
                       model_scores={"polynomial": rss_poly, "stretched": rss_str},
                       Ls=[int(L) for L in Ls], flagged=a.flagged, excluded=excluded)


def convex_increasing(curve: ConnectivityCurve, conservative: bool = False) -> dict:
    """Is -log p convex and increasing in log L (for dyadic L)?

    With ``conservative=True`` each check uses the Wilson end that works
    against it: lower ends of -log p for cells entering with a positive
    sign, upper ends otherwise.
    """
    y = _neglog(curve.p())
    y_lo = _neglog([e.wilson_high for e in curve.estimates])
    y_hi = _neglog([e.wilson_low for e in curve.estimates])
    if not conservative:
        y_lo = y_hi = y
    inc = [bool(y_lo[i + 1] > y_hi[i]) for i in range(len(y) - 1)]
    conv = [bool(y_lo[i + 1] + y_lo[i - 1] - 2 * y_hi[i] >= 0) for i in range(1, len(y) - 1)]
    return {"increasing": inc, "convex": conv, "ok": all(inc) and all(conv)}


# --------------------------------------------------------------------------
# critical-level proxies


@dataclass
class ScanRow:
    u: float
    alpha_hat: float
    alpha_lo: float
    alpha_hi: float
    cluster_fraction: float


@dataclass
class ScanResult:
    rows: list
    u_star_proxy: float | None
    u_starstar_proxy: float | None
    u_starstar_raw: float | None
    threshold: float
    Ls: list
    confinement: list
    note: str = "window-confined finite-size proxies"

    CSV_HEADER = "u,alpha_hat,alpha_lo,alpha_hi,cluster_fraction"

    def csv_rows(self) -> list[str]:
        return [",".join(fmt(v) for v in (r.u, r.alpha_hat, r.alpha_lo, r.alpha_hi,
                                           r.cluster_fraction)) for r in self.rows]


def ustar_scan(u_grid: Sequence[float], Ls: Sequence[int], replicas: int, seed: int = 0,
               d: int = 3, workers: int = 1, threshold: float = 0.1,
               confidence: float = 0.95, **sampler_kw) -> ScanResult:
    """Annulus exponents and largest vacant-cluster fractions along a u grid.

    The cluster fraction is measured in the window of the largest L.  The
    u** proxy is the smallest u whose alpha lower CI is positive, raised if
    needed to the u* proxy (the largest u with fraction above threshold), so
    the two proxies are always ordered.
    """
    grid = [float(u) for u in u_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("u grid must be increasing")
    if len(Ls) < 3:
        raise ValueError("need at least 3 L values")
    per_u = [[] for _ in grid]
    conf = []
    frac = None
    for j, L in enumerate(Ls):
        last = j == len(Ls) - 1
        ev, fr, w = sample_events("annulus", int(L), grid, replicas, seed, d, workers,
                                  cluster_fraction=last, stream=j, **sampler_kw)
        conf.append(w.radius)
        for k, u in enumerate(grid):
            per_u[k].append(CrossingEstimate(int(ev[:, k].sum()), replicas, u, "annulus",
                                             int(L), confidence))
        if last:
            frac = fr.mean(axis=0)
    rows = []
    for k, u in enumerate(grid):
        fit = alpha_fit(ConnectivityCurve(u, "annulus", list(Ls), per_u[k], conf))
        rows.append(ScanRow(u, fit.alpha_hat, fit.alpha_ci[0], fit.alpha_ci[1], float(frac[k])))
    above = [r.u for r in rows if r.cluster_fraction > threshold]
    u_star = max(above) if above else None
    pos = [r.u for r in rows if r.alpha_lo > 0]
    raw = min(pos) if pos else None
    uss = raw
    if raw is not None and u_star is not None and raw < u_star:
        uss = u_star
    return ScanResult(rows, u_star, uss, raw, threshold, list(Ls), conf)


# --------------------------------------------------------------------------
# segment lower bound in d = 3


def segment(L: int, d: int) -> np.ndarray:
    """Sites 0, e_1, ..., L e_1: the axis segment from 0 to S(0, L)."""
    return np.array([unit(d, 0, k) for k in range(L + 1)], dtype=np.int64)


def segment_capacity(L: int, d: int, G=None) -> float:
    from .capacity import capacity
    from .green import cached_table

    if G is None or G.max_radius < L:
        G = cached_table(d, max(L, 1))
    return capacity(segment(L, d), G)


@dataclass
class LowerCheckRow:
    L: int
    cap: float
    exact: float  # exp(-u cap)
    estimate: CrossingEstimate | None
    sigma: float
    margin: float  # p_hat - exact
    ok: bool
    cap_log_ratio: float  # cap log L / L
    cap_linear_ratio: float  # cap / L


def d3_lower_check(u: float, Ls: Sequence[int], replicas: int = 0, seed: int = 0, d: int = 3,
                   workers: int = 1, G=None, **sampler_kw) -> list[LowerCheckRow]:
    """Compare P[0 <-> S(0,L)] with exp(-u cap(S_L)) and report capacity growth.

    The Monte Carlo part runs only for d = 3 with ``replicas > 0``.  The
    standard error is taken at max(p_hat, exp(-u cap)), i.e. at the boundary
    of the inequality being tested, so a zero count is judged fairly.
    """
    check_dim(d)
    rows = []
    for j, L in enumerate(Ls):
        cap = segment_capacity(int(L), d, G)
        q = math.exp(-u * cap)
        est, sigma, margin, ok = None, float("nan"), float("nan"), True
        if d == 3 and replicas > 0:
            ev, _, _ = sample_events("sphere", int(L), [u], replicas, seed, d, workers,
                                     stream=j, **sampler_kw)
            est = CrossingEstimate(int(ev[:, 0].sum()), replicas, u, "sphere", int(L))
            ph = est.point_estimate
            pb = max(ph, q)
            sigma = math.sqrt(pb * (1 - pb) / replicas)
            margin = ph - q
            ok = margin >= -3 * sigma
        logL = math.log(L) if L > 1 else float("nan")
        rows.append(LowerCheckRow(int(L), cap, q, est, sigma, margin, ok,
                                  cap * logL / L, cap / L))
    return rows
