"""Renormalization bookkeeping: scales, boxes, descendant trees, certification.

Scales are ``L_n = L_0 ell_0^n``.  A label ``m = (n, i)`` owns the box
``C_m = i L_n + [0, L_n)^d`` and the block ``C~_m`` made of the 3^d level-n
boxes at l-inf distance at most 1 from it.  A level-n box has two families of
level-(n-1) descendants: ``H1`` (boxes of C_m touching its interior boundary)
and ``H2`` (boxes meeting the shell at distance L_n / 2 from C_m).  Trees pick
one descendant from each family at every internal node.

The certification part evaluates the increasing level sequence u_n, the
exponents K_n and the resulting bounds on p_n(u_n) in log space; all
unnamed constants are explicit inputs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np
from scipy import sparse

from .clusters import CrossingEstimate, box_crossings, fmt
from .lattice import BoxSpec, Window, check_dim

LOG2 = math.log(2.0)


class BoxLabel(NamedTuple):
    level: int
    index: tuple


@dataclass(frozen=True)
class ScaleHierarchy:
    L0: int
    ell0: int
    dim: int = 3
    depth: int = 1
    strict_mode: bool = True

    def __post_init__(self):
        check_dim(self.dim)
        if self.L0 < 1:
            raise ValueError("L0 must be >= 1")
        if self.ell0 < 2 or self.ell0 % 2:
            raise ValueError("ell0 must be a positive even integer")
        if self.strict_mode and (self.ell0 < 100 or self.ell0 % 10):
            raise ValueError("strict mode requires ell0 >= 100 and a multiple of 10")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")

    def L(self, n: int) -> int:
        return self.L0 * self.ell0 ** n

    def root(self, n: int | None = None) -> BoxLabel:
        n = self.depth if n is None else n
        return BoxLabel(n, (0,) * self.dim)

    def box(self, m: BoxLabel) -> BoxSpec:
        Ln = self.L(m.level)
        return BoxSpec(tuple(Ln * i for i in m.index), Ln)

    def tilde_box(self, m: BoxLabel) -> BoxSpec:
        Ln = self.L(m.level)
        return BoxSpec(tuple(Ln * (i - 1) for i in m.index), 3 * Ln)

    def window_for(self, m: BoxLabel) -> Window:
        """Smallest window containing the block of ``m``."""
        tb = self.tilde_box(m)
        lo, hi = tb.lower, tb.upper
        c = tuple((a + b) // 2 for a, b in zip(lo, hi))
        r = max(max(ci - a, b - ci) for a, b, ci in zip(lo, hi, c))
        return Window(c, r)

    def h1_set(self, m: BoxLabel) -> list[BoxLabel]:
        """Level-(n-1) boxes inside C_m that meet its interior boundary."""
        if m.level < 1:
            raise ValueError("descendants need level >= 1")
        l = self.ell0
        base = [l * i for i in m.index]
        out = []
        for off in itertools.product(range(l), repeat=self.dim):
            if any(o == 0 or o == l - 1 for o in off):
                out.append(BoxLabel(m.level - 1, tuple(b + o for b, o in zip(base, off))))
        return out

    def h2_set(self, m: BoxLabel) -> list[BoxLabel]:
        """Level-(n-1) boxes meeting the shell at l-inf distance L_n / 2 from C_m."""
        if m.level < 1:
            raise ValueError("descendants need level >= 1")
        if self.L(m.level) % 2:
            raise ValueError("L_n must be even")
        l = self.ell0
        h = l // 2
        base = [l * i for i in m.index]
        out = []
        for off in itertools.product(range(-h, l + h), repeat=self.dim):
            if any(o == -h or o == l + h - 1 for o in off):
                out.append(BoxLabel(m.level - 1, tuple(b + o for b, o in zip(base, off))))
        return out

    @property
    def h1(self) -> int:
        return self.ell0 ** self.dim - (self.ell0 - 2) ** self.dim

    @property
    def h2(self) -> int:
        return (2 * self.ell0) ** self.dim - (2 * self.ell0 - 2) ** self.dim

    def default_c0(self) -> float:
        """Smallest c0 of the form c^2 with c ell0^(d-1) >= max(h1, h2)."""
        return (max(self.h1, self.h2) / self.ell0 ** (self.dim - 1)) ** 2

    @property
    def rho(self) -> float:
        return LOG2 / math.log(self.ell0)


def tree_count(n: int, hierarchy: ScaleHierarchy) -> int:
    """Exact number of descendant trees below a level-n label."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return (hierarchy.h1 * hierarchy.h2) ** (2 ** n - 1)


def bound_check(n: int, hierarchy: ScaleHierarchy, c0: float | None = None) -> bool:
    """Is tree_count(n) <= (c0 ell0^(2(d-1)))^(2^n - 1)?  Exact rational test."""
    c0 = hierarchy.default_c0() if c0 is None else c0
    base = Fraction(c0) * hierarchy.ell0 ** (2 * (hierarchy.dim - 1))
    e = 2 ** n - 1
    if e == 0:
        return True
    # compare per-factor, exact since both sides are e-th powers
    return hierarchy.h1 * hierarchy.h2 <= base


def enumerate_trees(m: BoxLabel, hierarchy: ScaleHierarchy):
    """Yield every tree below ``m`` as a dict label -> (child1, child2)."""
    if m.level == 0:
        yield {}
        return
    for a in hierarchy.h1_set(m):
        for b in hierarchy.h2_set(m):
            for ta in enumerate_trees(a, hierarchy):
                for tb in enumerate_trees(b, hierarchy):
                    t = {m: (a, b)}
                    t.update(ta)
                    t.update(tb)
                    yield t


def tree_leaves(tree: dict, m: BoxLabel) -> list[BoxLabel]:
    if m.level == 0:
        return [m]
    a, b = tree[m]
    return tree_leaves(tree, a) + tree_leaves(tree, b)


def tree_levels(tree: dict, m: BoxLabel) -> dict:
    """level k -> labels of the tree at that level."""
    out: dict = {}
    stack = [m]
    while stack:
        x = stack.pop()
        out.setdefault(x.level, []).append(x)
        if x.level > 0:
            stack.extend(tree[x])
    return out


def check_tree(tree: dict, m: BoxLabel, hierarchy: ScaleHierarchy) -> bool:
    """Size, descendant and disjointness conditions of a tree."""
    levels = tree_levels(tree, m)
    for k in range(m.level + 1):
        labs = levels.get(k, [])
        if len(labs) != 2 ** (m.level - k):
            return False
        boxes = [hierarchy.tilde_box(x) for x in labs]
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                if boxes[i].intersects(boxes[j]):
                    return False
    for x, (a, b) in tree.items():
        if a not in set(hierarchy.h1_set(x)) or b not in set(hierarchy.h2_set(x)):
            return False
    return True


def _site_incidence(boxes: Sequence[BoxSpec], origin: Sequence[int], side: int):
    """Sparse box-by-site incidence over the grid origin + [0, side)^d."""
    rows, cols = [], []
    shape = (side,) * len(origin)
    for r, b in enumerate(boxes):
        pts = np.array(b.sites(), dtype=np.int64) - np.asarray(origin)
        if np.any(pts < 0) or np.any(pts >= side):
            raise ValueError("box leaves the reference grid")
        cols.append(np.ravel_multi_index(tuple(pts.T), shape))
        rows.append(np.full(len(pts), r))
    return sparse.csr_matrix(
        (np.ones(sum(map(len, cols))), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(boxes), side ** len(origin)),
    )


def verify_descendant_geometry(m: BoxLabel, hierarchy: ScaleHierarchy) -> dict:
    """Check block disjointness and containment for every descendant pair by sites.

    Each block is expanded into its sites; a sparse incidence product counts
    shared sites for all ``|H1| x |H2|`` pairs at once.
    """
    tm = hierarchy.tilde_box(m)
    pad = hierarchy.L(m.level)  # H2 blocks may reach beyond C~_m only if broken
    origin = tuple(c - pad for c in tm.lower)
    side = tm.side + 2 * pad
    h1 = [hierarchy.tilde_box(a) for a in hierarchy.h1_set(m)]
    h2 = [hierarchy.tilde_box(b) for b in hierarchy.h2_set(m)]
    A = _site_incidence(h1, origin, side)
    B = _site_incidence(h2, origin, side)
    overlap = (A @ B.T).tocoo()
    inside = np.zeros(side ** hierarchy.dim, dtype=bool)
    inside[_site_incidence([tm], origin, side).indices] = True
    contained = bool(inside[A.indices].all() and inside[B.indices].all())
    return {
        "pairs": len(h1) * len(h2),
        "overlapping_pairs": int((overlap.data > 0).sum()),
        "contained": contained,
        "ok": contained and int((overlap.data > 0).sum()) == 0,
    }


# --------------------------------------------------------------------------
# crossing indicators and p_n estimation


def crossing_indicators(vacant_mask: np.ndarray, window: Window, labels: Sequence[BoxLabel],
                        hierarchy: ScaleHierarchy) -> np.ndarray:
    pairs = [(hierarchy.box(x), hierarchy.tilde_box(x)) for x in labels]
    return box_crossings(vacant_mask, window, pairs)


def lemma21_witness(sample, level: int, m: BoxLabel, hierarchy: ScaleHierarchy):
    """Return (holds, tree).  ``holds`` is False only if the inclusion fails.

    When the crossing of ``m`` occurs, look for descendants in H1 and H2 that
    both cross; ``tree`` is such a pair, or None if the crossing is absent.
    """
    vac = sample.vacant_mask(level)
    w = sample.window
    if not crossing_indicators(vac, w, [m], hierarchy)[0]:
        return True, None
    h1, h2 = hierarchy.h1_set(m), hierarchy.h2_set(m)
    a1 = crossing_indicators(vac, w, h1, hierarchy)
    if not a1.any():
        return False, None
    a2 = crossing_indicators(vac, w, h2, hierarchy)
    if not a2.any():
        return False, None
    return True, {m: (h1[int(np.argmax(a1))], h2[int(np.argmax(a2))])}


@dataclass
class PnEstimate:
    estimate: CrossingEstimate
    tree: dict | None
    strategy: str
    selection_trials: int
    n: int


def _random_tree(m: BoxLabel, hierarchy: ScaleHierarchy, rng) -> dict:
    if m.level == 0:
        return {}
    h1, h2 = hierarchy.h1_set(m), hierarchy.h2_set(m)
    a = h1[int(rng.integers(len(h1)))]
    b = h2[int(rng.integers(len(h2)))]
    t = {m: (a, b)}
    t.update(_random_tree(a, hierarchy, rng))
    t.update(_random_tree(b, hierarchy, rng))
    return t


def estimate_p_n(n: int, hierarchy: ScaleHierarchy, samples: Sequence, level: int = 0,
                 strategy: str = "auto", restarts: int = 64, select_fraction: float = 0.5,
                 seed: int = 0, u: float = float("nan"), confidence: float = 0.95) -> PnEstimate:
    """Estimate p_n(u) = sup over trees of P[all leaf crossings].

    ``samples`` are interlacement samples whose window contains the block of
    the root label.  For n >= 1 the tree is chosen on the first
    ``select_fraction`` of the samples and its probability is estimated on the
    rest, so the reported estimate is unbiased for the chosen tree and hence
    a lower estimate of the supremum.  ``exhaustive`` scans all trees (n <= 1);
    ``random`` keeps the best of ``restarts`` uniformly drawn trees.
    """
    m = hierarchy.root(n)
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    wb = samples[0].window.box()
    if not wb.contains_box(hierarchy.tilde_box(m)):
        raise ValueError("window too small for the block of the root label")
    if n == 0:
        hits = sum(bool(crossing_indicators(s.vacant_mask(level), s.window, [m], hierarchy)[0])
                   for s in samples)
        est = CrossingEstimate(hits, len(samples), u, "p0", hierarchy.L0, confidence)
        return PnEstimate(est, {}, "single", 0, 0)
    if strategy == "auto":
        strategy = "exhaustive" if n == 1 else "random"
    k = int(round(select_fraction * len(samples)))
    if not 0 < k < len(samples):
        raise ValueError("selection split leaves an empty half")
    sel, ev = samples[:k], samples[k:]
    if strategy == "exhaustive":
        if n != 1:
            raise ValueError("exhaustive tree search is only supported for n = 1")
        h1, h2 = hierarchy.h1_set(m), hierarchy.h2_set(m)
        score = np.zeros((len(h1), len(h2)))
        for s in sel:
            vac = s.vacant_mask(level)
            a1 = crossing_indicators(vac, s.window, h1, hierarchy).astype(float)
            a2 = crossing_indicators(vac, s.window, h2, hierarchy).astype(float)
            score += np.outer(a1, a2)
        i, j = np.unravel_index(int(np.argmax(score)), score.shape)
        best = {m: (h1[i], h2[j])}
    elif strategy == "random":
        rng = np.random.default_rng(seed)
        trees = [_random_tree(m, hierarchy, rng) for _ in range(restarts)]
        scores = [_count_tree(t, m, sel, level, hierarchy) for t in trees]
        best = trees[int(np.argmax(scores))]
    else:
        raise ValueError(f"unknown tree selection strategy {strategy!r}")
    hits = _count_tree(best, m, ev, level, hierarchy)
    est = CrossingEstimate(hits, len(ev), u, f"p{n}", hierarchy.L0, confidence)
    return PnEstimate(est, best, strategy, len(sel), n)


def _count_tree(tree, m, samples, level, hierarchy) -> int:
    leaves = tree_leaves(tree, m)
    return sum(bool(crossing_indicators(s.vacant_mask(level), s.window, leaves, hierarchy).all())
               for s in samples)


# --------------------------------------------------------------------------
# certification arithmetic


@dataclass(frozen=True)
class CertParams:
    u0: float
    r0: int
    K0: float
    c0: float
    c1: float
    c2: float
    d: int
    L0: int
    ell0: int

    def __post_init__(self):
        if self.K0 <= LOG2:
            raise ValueError("K0 must exceed log 2")
        if self.u0 <= 0 or self.r0 < 1:
            raise ValueError("u0 must be positive and r0 >= 1")
        if min(self.c0, self.c2) <= 0 or self.c1 < 0:
            raise ValueError("constants must be positive")
        if self.L0 < 1 or self.ell0 < 2:
            raise ValueError("L0 >= 1 and ell0 >= 2 required")


def u_sequence(u0: float, r0: int, ell0: int, c1: float, d: int, n_max: int):
    """Levels u_0..u_{n_max} with r_n = r0 2^n, and their limit."""
    q = float(ell0) ** -(d - 2)
    s = 0.0
    us = [u0]
    for k in range(n_max):
        s += (r0 * 2 ** k + 1) * 2 ** k * q ** (k + 1)
        us.append(u0 * math.exp(c1 * s))
    u_inf = u0 * math.exp(c1 * q * (r0 / (1 - 4 * q) + 1 / (1 - 2 * q)))
    return us, u_inf


def r_sequence(r0: int, n_max: int) -> list[int]:
    return [r0 * 2 ** n for n in range(n_max + 1)]


@dataclass
class DecayBound:
    n: int
    bound: float
    log_assembled: float
    rho: float
    trivial: bool


def decay_bound(x: Sequence[int], hierarchy: ScaleHierarchy, K0: float | None = None,
                c0: float | None = None) -> DecayBound:
    """Bound on P[0 <-> x] from the certified crossing bounds.

    Picks n with 2 L_n < |x|_inf <= 2 L_{n+1} and returns 2^(-2^n).  The
    exact assembled bound |Lambda| e^{-(K0 - log 2) 2^n} is reported too; it
    sits below 2^(-2^n) whenever K0 is at least the :func:`theorem_params` value.
    """
    r = max(abs(int(v)) for v in x)
    if r <= 2 * hierarchy.L0:
        return DecayBound(-1, 1.0, 0.0, hierarchy.rho, True)
    n = 0
    while not 2 * hierarchy.L(n) < r <= 2 * hierarchy.L(n + 1):
        n += 1
    c0 = hierarchy.default_c0() if c0 is None else c0
    A = math.log(c0) + 2 * (hierarchy.dim - 1) * math.log(hierarchy.ell0)
    K0 = A + 2 * LOG2 if K0 is None else K0
    log_ass = min(0.0, (2 ** n - 1) * A - (K0 - LOG2) * 2 ** n)
    bound = 2.0 ** -(2 ** n)
    if log_ass > -(2 ** n) * LOG2:
        bound = math.exp(log_ass)
    return DecayBound(n, bound, log_ass, hierarchy.rho, False)


@dataclass
class CertResult:
    params: CertParams
    u_n: list
    u_inf: float
    r_n: list
    K_n: list
    log_bound_n: list  # -(K0 - log 2) 2^n
    log_bound_Kn: list  # -K_n 2^n, the sharper intermediate bound
    rho: float
    conditions: dict
    margins: dict
    notes: list = field(default_factory=list)

    @property
    def conditions_ok(self) -> bool:
        return all(self.conditions.values())

    @property
    def bound_n(self) -> list:
        return [math.exp(v) for v in self.log_bound_n]

    def to_json(self) -> str:
        def num(v):
            if isinstance(v, bool) or v is None:
                return v
            if isinstance(v, int):
                return v
            if isinstance(v, float):
                if math.isinf(v) or math.isnan(v):
                    return str(v)
                return float(fmt(v))
            if isinstance(v, dict):
                return {k: num(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [num(x) for x in v]
            return v

        doc = {
            "params": num(asdict(self.params)),
            "u_n": num(self.u_n),
            "u_inf": num(self.u_inf),
            "r_n": self.r_n,
            "K_n": num(self.K_n),
            "log_bound_n": num(self.log_bound_n),
            "bound_n": num(self.bound_n),
            "rho": num(self.rho),
            "conditions": self.conditions,
            "margins": num(self.margins),
            "notes": self.notes,
        }
        return json.dumps(doc, indent=2)


CONSTANTS_NOTE = ("bounds are conditional on the supplied constants c0, c1, c2, "
                  "which have no known numerical values")


def certify(params: CertParams, p0_high: float, n_max: int = 30,
            hierarchy: ScaleHierarchy | None = None, allow_relaxed: bool = False) -> CertResult:
    """Check the two starting conditions and propagate the K_n recursion.

    ``p0_high`` is the conservative (upper) end of the p_0(u_0) estimate;
    a :class:`CrossingEstimate` is accepted as well.
    """
    if isinstance(p0_high, CrossingEstimate):
        p0_high = p0_high.wilson_high
    if params.ell0 < 100 or params.ell0 % 10:
        if not allow_relaxed:
            raise ValueError("ell0 violates strict mode; pass allow_relaxed to override")
    d = params.d
    us, u_inf = u_sequence(params.u0, params.r0, params.ell0, params.c1, d, n_max)
    rs = r_sequence(params.r0, n_max)
    log_q = math.log(params.c2) - (d - 2) * math.log(params.ell0)  # log(c2 ell0^-(d-2))
    # scale: max(u_inf L0^(d-2), e^K0) <= (ell0^(d-2) / c2)^(r0/2), in logs
    lhs = max(math.log(u_inf) + (d - 2) * math.log(params.L0), params.K0)
    rhs = -0.5 * params.r0 * log_q
    # p0: p_0(u_0) <= e^-K0 at the conservative end of the estimate
    log_p0 = math.log(p0_high) if p0_high > 0 else -math.inf
    margins = {"scale": rhs - lhs, "p0": -params.K0 - log_p0}
    conditions = {k: v >= 0 for k, v in margins.items()}
    notes = [CONSTANTS_NOTE]
    if params.ell0 < 100 or params.ell0 % 10:
        notes.append("relaxed mode: ell0 below the range the constants assume")
    K = [params.K0]
    log_b = [-(params.K0 - LOG2)]
    log_bk = [-params.K0]
    if all(conditions.values()):
        for n in range(n_max):
            t = 2.0 ** n
            inc = np.logaddexp(0.0, K[n] * t + 0.5 * params.r0 * t * log_q) / (2 * t)
            K.append(K[n] - float(inc))
            log_b.append(-(params.K0 - LOG2) * 2.0 ** (n + 1))
            log_bk.append(-K[n + 1] * 2.0 ** (n + 1))
        if min(K) < params.K0 - LOG2 - 1e-12:
            raise ArithmeticError("K_n fell below K0 - log 2")
    rho = LOG2 / math.log(params.ell0)
    return CertResult(params, us, u_inf, rs, K, log_b, log_bk, rho, conditions, margins, notes)


def recursion_step_check(res: CertResult) -> list[bool]:
    """Per-level check of the squared-bound inequality on the K_n bounds.

    bound_{n+1} <= bound_n^2 (1 + e^{K_n 2^n} q^{r0 2^(n-1)}), in logs.
    """
    p = res.params
    log_q = math.log(p.c2) - (p.d - 2) * math.log(p.ell0)
    out = []
    for n in range(len(res.K_n) - 1):
        t = 2.0 ** n
        rhs = 2 * res.log_bound_Kn[n] + float(np.logaddexp(0.0, res.K_n[n] * t
                                                           + 0.5 * p.r0 * t * log_q))
        out.append(res.log_bound_Kn[n + 1] <= rhs + 1e-9 * abs(rhs))
    return out


def _floor_exact(x: Fraction) -> int:
    return x.numerator // x.denominator


def theorem_params(epsilon: float, L0: int, d: int, c0: float | None = None):
    """Default (r0, K0, ell0) for a target exponent ``epsilon`` and base scale L0.

    r0 = floor(12 (d-1) / epsilon) + 1, ell0 = 200 (floor(L0^(epsilon / (3(d-1)))) + 1)
    and K0 = log(c0 ell0^(2(d-1))) + 2 log 2.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    check_dim(d)
    eps = Fraction(str(epsilon)) if isinstance(epsilon, float) else Fraction(epsilon)
    r0 = _floor_exact(Fraction(12) * (d - 1) / eps) + 1
    expo = float(eps / (3 * (d - 1)))
    ell0 = 200 * (int(math.floor(L0 ** expo)) + 1)
    if c0 is None:
        c0 = ScaleHierarchy(L0, ell0, d, strict_mode=True).default_c0()
    K0 = math.log(c0) + 2 * (d - 1) * math.log(ell0) + 2 * LOG2
    return r0, K0, ell0


# --------------------------------------------------------------------------


@dataclass
class RecursionReport:
    lhs: float
    rhs: float
    lhs_low: float
    rhs_high: float
    margin: float  # rhs - lhs at point estimates
    conservative_margin: float  # rhs_high - lhs_low
    second_term: float
    sprinkling_ok: bool


def sprinkling_ok(u_n: float, u_next: float, n: int, r_n: int, c1: float, ell0: int, d: int) -> bool:
    need = u_n * (1 + c1 * 2 ** n * float(ell0) ** (-(n + 1) * (d - 2))) ** (r_n + 1)
    return u_next >= need * (1 - 1e-12)


def recursion_second_term(u_n: float, L0: int, c2: float, ell0: int, n: int, r_n: int, d: int) -> float:
    return u_n * L0 ** (d - 2) * (c2 ** (n + 1) * float(ell0) ** (-(n + 1) * (d - 2))) ** r_n


def verify_recursion(p_n_next: CrossingEstimate, p_n_cur: CrossingEstimate,
                     p_next_next: CrossingEstimate, u_n: float, u_next: float, n: int,
                     r_n: int, c1: float, c2: float, L0: int, ell0: int, d: int) -> RecursionReport:
    """One-sided statistical check of p_{n+1}(u_{n+1}) <= p_n(u_{n+1}) (p_n(u_n) + term).

    The three estimates are p_n(u_{n+1}), p_n(u_n) and p_{n+1}(u_{n+1}).
    """
    if not sprinkling_ok(u_n, u_next, n, r_n, c1, ell0, d):
        raise ValueError("sprinkling condition unmet")
    t = recursion_second_term(u_n, L0, c2, ell0, n, r_n, d)
    rhs = p_n_next.point_estimate * (p_n_cur.point_estimate + t)
    rhs_hi = p_n_next.wilson_high * (p_n_cur.wilson_high + t)
    lhs = p_next_next.point_estimate
    lhs_lo = p_next_next.wilson_low
    return RecursionReport(lhs, rhs, lhs_lo, rhs_hi, rhs - lhs, rhs_hi - lhs_lo, t, True)


def calibrate_c2(G, hierarchy: ScaleHierarchy, eq=None) -> float:
    """Empirical constant for hitting a level-0 box from distance L_1.

    Returns ell0^(d-2) times the largest hitting probability of C_m (m at
    level 0) over the sphere of radius L_1 about its centre.
    """
    from .capacity import equilibrium_measure, return_scale_check
    from .lattice import sphere

    m = hierarchy.root(0)
    K = np.array(hierarchy.box(m).sites(), dtype=np.int64)
    c = tuple(int(v) for v in K.mean(axis=0).round())
    pts = np.array(sphere(c, hierarchy.L(1)), dtype=np.int64)
    eq = equilibrium_measure(K, G) if eq is None else eq
    h = return_scale_check(pts, K, G, eq)
    return float(h * hierarchy.ell0 ** (hierarchy.dim - 2))
