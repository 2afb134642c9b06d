"""Sampling the interlacement set on a finite window, coupled across levels.

For a window ``K = B(c, r)`` the trajectories of the interlacement at level
``u`` that meet K form a Poisson process with intensity ``u P_{e_K}``, and
their traces on K are exactly ``I^u intersect K``.  Levels are coupled by
adding independent Poisson slabs ``(u_{k-1}, u_k]``; each site of the window
stores the index of the first slab whose trajectories visit it, so the
occupied sets are nested by construction.

Walk truncation
---------------
A walk is followed step by step inside and near the window.  At l-inf
distance ``D`` from the window it may instead advance ``n`` steps at once,
with ``n`` chosen from Bernstein's maximal inequality so that the chance the
skipped stretch touched the window is at most ``skip_delta``; that chance is
added to the bias budget.  Outside ``B(c, kill_radius)`` the walk is killed
as soon as an upper bound on its probability of ever returning to the window
is at most ``return_bias_eps``; the bound is added to the budget as well.
The bias budget of a sample therefore bounds the total-variation distance
between the sampled trace and the exact one.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba as nb
import numpy as np
from scipy import ndimage

from .capacity import EquilibriumMeasure
from .green import asymptotic_constant
from .lattice import Window
from .rng import binomial, poisson, replica_generator

NEVER = np.uint8(255)
MAX_LEVELS = 254


@dataclass(frozen=True)
class SamplerConfig:
    u_levels: tuple
    window: Window
    kill_radius: int | None = None
    return_bias_eps: float = 1e-5
    seed: int = 0
    replica_count: int = 1
    skip_delta: float = 1e-8
    record_visits: bool = False
    stream: int = 0

    def __post_init__(self):
        u = tuple(float(v) for v in self.u_levels)
        object.__setattr__(self, "u_levels", u)
        if not u:
            raise ValueError("u_levels must be nonempty")
        if len(u) > MAX_LEVELS:
            raise ValueError(f"at most {MAX_LEVELS} levels")
        if u[0] < 0 or any(b <= a for a, b in zip(u, u[1:])):
            raise ValueError("u_levels must be nonnegative and strictly increasing")
        if not 0 < self.return_bias_eps < 1:
            raise ValueError("return_bias_eps must lie in (0, 1)")
        if not 0 < self.skip_delta < 1:
            raise ValueError("skip_delta must lie in (0, 1)")
        if self.replica_count < 1:
            raise ValueError("replica_count must be positive")
        if self.kill_radius is not None and self.kill_radius <= self.window.radius:
            raise ValueError("kill radius insufficient: must exceed the window radius")


@dataclass
class TrajectoryRecord:
    level_index: int
    start: tuple
    visited: list
    step_count: int
    visited_count: int
    killed_at: tuple
    kill_bound: float


@dataclass
class InterlacementSample:
    config: SamplerConfig
    first_level: np.ndarray  # window-shaped uint8, NEVER if unvisited
    counts: np.ndarray  # trajectories per slab
    traj: dict = field(repr=False)
    bias_budget: float = 0.0
    replica: int = 0

    @property
    def window(self) -> Window:
        return self.config.window

    @property
    def n_levels(self) -> int:
        return len(self.config.u_levels)

    def _check_level(self, k: int) -> int:
        if not 0 <= k < self.n_levels:
            raise IndexError(f"level index {k} out of range")
        return k

    def occupied_mask(self, k: int) -> np.ndarray:
        return self.first_level <= self._check_level(k)

    def vacant_mask(self, k: int) -> np.ndarray:
        return self.first_level > self._check_level(k)

    def occupied(self, k: int) -> set:
        return self.window.points_of(self.occupied_mask(k))

    @property
    def trajectories(self) -> list[TrajectoryRecord]:
        t = self.traj
        w = self.window
        out = []
        for i in range(len(t["level"])):
            vis = []
            if t["visit_ptr"] is not None:
                a, b = t["visit_ptr"][i], t["visit_ptr"][i + 1]
                vis = [tuple(int(v) for v in p) for p in w.points(t["visits"][a:b])]
            out.append(TrajectoryRecord(
                level_index=int(t["level"][i]),
                start=tuple(int(v) for v in t["start"][i]),
                visited=vis,
                step_count=int(t["steps"][i]),
                visited_count=int(t["nvisits"][i]),
                killed_at=tuple(int(v) for v in t["killed_at"][i]),
                kill_bound=float(t["kill_bound"][i]),
            ))
        return out

    def dump_lines(self) -> list[str]:
        """``level,start,step_count,visited_count`` per trajectory."""
        t = self.traj
        return [
            f"{int(t['level'][i])},{' '.join(str(int(v)) for v in t['start'][i])},"
            f"{int(t['steps'][i])},{int(t['nvisits'][i])}"
            for i in range(len(t["level"]))
        ]


# --------------------------------------------------------------------------
# numba kernel


# random() returns k / 2^53 with k uniform, so it yields 53 exact bits
RAW_BITS = 53
RAW_SCALE = float(1 << RAW_BITS)
MIN_JUMP = 64  # below this, single steps are cheaper than a multinomial jump


@nb.njit(cache=True)
def _step(rng, x, d, nbits, state):
    """One uniform nearest-neighbour step; directions come from buffered bits.

    ``state = [buffer, bits left]``.  Each direction uses ``nbits`` bits and
    is rejected if it falls outside ``[0, 2d)``, so steps are exactly uniform.
    """
    mask = (1 << nbits) - 1
    while True:
        if state[1] < nbits:
            state[0] = np.int64(rng.random() * RAW_SCALE)
            state[1] = RAW_BITS
        j = state[0] & mask
        state[0] >>= nbits
        state[1] -= nbits
        if j < 2 * d:
            break
    if j < d:
        x[j] += 1
    else:
        x[j - d] -= 1


@nb.njit(cache=True)
def _jump(rng, x, d, n):
    """Advance ``x`` by n walk steps in one draw.

    Steps are allocated to coordinate pairs (and a final single coordinate
    when d is odd).  Within a pair the rotated coordinates x+y and x-y move
    as two independent +-1 walks, so a pair costs two binomials.
    """
    rem = n
    left = d
    i = 0
    while left > 0:
        g = 2 if left >= 2 else 1
        c = rem if g == left else binomial(rng, rem, g / left)
        rem -= c
        if g == 2:
            a = 2 * binomial(rng, c, 0.5) - c
            b = 2 * binomial(rng, c, 0.5) - c
            x[i] += (a + b) // 2
            x[i + 1] += (a - b) // 2
        else:
            x[i] += 2 * binomial(rng, c, 0.5) - c
        i += g
        left -= g


@nb.njit(cache=True)
def _bernstein_len(D, d, log_inv_delta):
    """Largest n with exp(-D^2 / (2 (n/d + D/3))) <= delta.

    Freedman's inequality for a martingale with increments in [-1, 1] and
    conditional variance 1/d per step, e.g. the walk projected on a unit
    vector with nonnegative coordinates.
    """
    return int(d * (D * D / (2.0 * log_inv_delta) - D / 3.0))


@nb.njit(cache=True)
def _log_chernoff(n, D, d):
    """log of 2 inf_t E[e^{t(S_n - D)}] for one coordinate of the walk.

    By Levy's inequality this bounds P[max_{k<=n} S_k >= D].
    """
    if n == 0:
        return -np.inf
    lo, hi = 0.0, 50.0
    for _ in range(80):
        th = 0.5 * (lo + hi)
        q = 1.0 - 1.0 / d + math.cosh(th) / d
        if n * math.sinh(th) / d / q < D:
            lo = th
        else:
            hi = th
    th = 0.5 * (lo + hi)
    return math.log(2.0) - th * D + n * math.log(1.0 - 1.0 / d + math.cosh(th) / d)


@nb.njit(cache=True)
def _skip_table(d, delta, dmax):
    """Largest n per distance D whose skipped stretch crosses D w.p. <= delta."""
    log_delta = math.log(delta)
    out = np.zeros(dmax, dtype=np.int64)
    for D in range(1, dmax):
        best = max(_bernstein_len(float(D), d, -log_delta), 0)
        lo, hi = best, max(2 * best, 16)
        while _log_chernoff(hi, float(D), d) <= log_delta:
            lo, hi = hi, 2 * hi
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _log_chernoff(mid, float(D), d) <= log_delta:
                lo = mid
            else:
                hi = mid
        out[D] = lo
    return out


SKIP_TABLE_SIZE = 4096
_skip_cache: dict = {}


def skip_lengths(d: int, delta: float) -> np.ndarray:
    key = (d, delta)
    if key not in _skip_cache:
        _skip_cache[key] = _skip_table(d, delta, SKIP_TABLE_SIZE)
    return _skip_cache[key]


@nb.njit(cache=True)
def _run(rng, d, r_w, slab_means, sup, cum, kill_radius, eps, cap_coef,
         rad_euclid, delta, skip_table, first_level, record):
    log_inv_delta = math.log(1.0 / delta)
    side = 2 * r_w + 1
    n_lev = slab_means.shape[0]
    counts = np.empty(n_lev, dtype=np.int64)
    for k in range(n_lev):
        counts[k] = poisson(rng, slab_means[k])
    ntot = counts.sum()
    level = np.empty(ntot, dtype=np.int64)
    start = np.empty((ntot, d), dtype=np.int64)
    steps = np.zeros(ntot, dtype=np.int64)
    nvis = np.zeros(ntot, dtype=np.int64)
    killed = np.empty((ntot, d), dtype=np.int64)
    kbound = np.zeros(ntot)
    skip = np.zeros(ntot)
    moves = np.zeros((ntot, 2), dtype=np.int64)  # single steps, jumps
    cap_vis = 1024 if record else 1
    visits = np.empty(cap_vis, dtype=np.int64)
    ptr = np.zeros(ntot + 1, dtype=np.int64)
    nv_total = 0
    x = np.empty(d, dtype=np.int64)
    nbits = 1
    while (1 << nbits) < 2 * d:
        nbits += 1
    state = np.zeros(2, dtype=np.int64)
    t = 0
    for lev in range(n_lev):
        for _ in range(counts[lev]):
            s = np.searchsorted(cum, rng.random() * cum[-1], side="right")
            if s >= sup.shape[0]:
                s = sup.shape[0] - 1
            for i in range(d):
                x[i] = sup[s, i]
                start[t, i] = sup[s, i]
            level[t] = lev
            while True:
                m = 0
                for i in range(d):
                    a = abs(x[i])
                    if a > m:
                        m = a
                if m <= r_w:
                    idx = 0
                    for i in range(d):
                        idx = idx * side + (x[i] + r_w)
                    if first_level[idx] > lev:
                        first_level[idx] = lev
                    nvis[t] += 1
                    if record:
                        if nv_total >= visits.shape[0]:
                            grown = np.empty(2 * visits.shape[0], dtype=np.int64)
                            grown[:nv_total] = visits[:nv_total]
                            visits = grown
                        visits[nv_total] = idx
                        nv_total += 1
                    _step(rng, x, d, nbits, state)
                    steps[t] += 1
                    moves[t, 0] += 1
                    continue
                if m > kill_radius:
                    r2 = 0.0
                    for i in range(d):
                        r2 += float(x[i]) * float(x[i])
                    rho = math.sqrt(r2) - rad_euclid
                    if rho >= 10.0:
                        ub = cap_coef * rho ** (2.0 - d) * (1.0 + 1.0 / (rho * rho))
                        if ub <= eps:
                            kbound[t] = ub
                            break
                D = m - r_w
                n = skip_table[D] if D < skip_table.shape[0] else 0
                # projected walk toward the window must cover |(D_i)|_2
                a2 = 0.0
                for i in range(d):
                    e = abs(x[i]) - r_w
                    if e > 0:
                        a2 += float(e) * float(e)
                nb_ = _bernstein_len(math.sqrt(a2), d, log_inv_delta)
                if nb_ > n:
                    n = nb_
                if n >= MIN_JUMP:
                    _jump(rng, x, d, n)
                    steps[t] += n
                    moves[t, 1] += 1
                    skip[t] += delta
                else:
                    # l-inf distance drops by at most 1 per step, so D - 1
                    # steps cannot reach the window
                    k = D - 1 if D > 1 else 1
                    for _ in range(k):
                        _step(rng, x, d, nbits, state)
                    steps[t] += k
                    moves[t, 0] += k
            for i in range(d):
                killed[t, i] = x[i]
            ptr[t + 1] = nv_total
            t += 1
    return counts, level, start, steps, nvis, killed, kbound, skip, visits[:nv_total], ptr, moves


# --------------------------------------------------------------------------


def default_kill_radius(window: Window, cap: float, eps: float) -> int:
    """Smallest radius beyond which every site passes the return test."""
    d = window.dim
    rho = (cap * asymptotic_constant(d) * 1.01 / eps) ** (1.0 / (d - 2))
    rho = max(rho, 10.0)
    return int(math.ceil(rho + window.radius * math.sqrt(d)))


_measure_cache: dict = {}


def window_measure(window: Window, G=None) -> EquilibriumMeasure:
    """Equilibrium measure of the window's site set, cached per (d, radius).

    The measure of B(0, r) is computed once and translated.
    """
    from .capacity import equilibrium_measure
    from .green import cached_table

    key = (window.dim, window.radius)
    if key not in _measure_cache:
        if G is None or G.max_radius < 2 * window.radius:
            G = cached_table(window.dim, max(2 * window.radius, 1))
        base = Window((0,) * window.dim, window.radius)
        _measure_cache[key] = equilibrium_measure(base.site_array(), G)
    eq = _measure_cache[key]
    shift = np.asarray(window.center, dtype=np.int64)
    if not shift.any():
        return eq
    return EquilibriumMeasure(eq.set_points + shift, eq.weights, eq.capacity,
                              eq.residual, eq.clamped, eq.method)


def make_sampler(window: Window, u_levels, seed: int = 0, replica_count: int = 1,
                 G=None, **kw) -> "Prepared":
    """Config plus equilibrium measure, ready for :func:`sample_prepared`."""
    cfg = SamplerConfig(tuple(u_levels), window, seed=seed, replica_count=replica_count, **kw)
    return prepare(cfg, window_measure(window, G))


@dataclass
class Prepared:
    """Per-config constants shared by every replica."""

    config: SamplerConfig
    sup: np.ndarray
    cum: np.ndarray
    slab_means: np.ndarray
    kill_radius: int
    cap: float


def prepare(config: SamplerConfig, eq: EquilibriumMeasure) -> Prepared:
    w = config.window
    if eq.dim != w.dim:
        raise ValueError("equilibrium measure dimension mismatch")
    if len(eq.set_points) != w.size or np.any(eq.set_points.min(axis=0) != np.asarray(w.lower)):
        raise ValueError("equilibrium measure must be that of the window")
    sup = (eq.support_points - np.asarray(w.center)).astype(np.int64)
    cum = np.cumsum(eq.support_weights)
    u = np.asarray(config.u_levels)
    slabs = np.diff(np.concatenate([[0.0], u])) * eq.capacity
    kr = config.kill_radius
    if kr is None:
        kr = default_kill_radius(w, eq.capacity, config.return_bias_eps)
    return Prepared(config, sup, cum, slabs, int(kr), eq.capacity)


def sample_prepared(prep: Prepared, replica: int) -> InterlacementSample:
    cfg = prep.config
    w = cfg.window
    rng = replica_generator(cfg.seed, replica, cfg.stream)
    first = np.full(w.size, NEVER, dtype=np.uint8)
    d = w.dim
    (counts, level, start, steps, nvis, killed, kbound, skip,
     visits, ptr, moves) = _run(
        rng, d, w.radius, prep.slab_means, prep.sup, prep.cum, prep.kill_radius,
        cfg.return_bias_eps, prep.cap * asymptotic_constant(d),
        w.radius * math.sqrt(d), cfg.skip_delta, skip_lengths(d, cfg.skip_delta), first,
        cfg.record_visits,
    )
    c = np.asarray(w.center, dtype=np.int64)
    traj = dict(
        level=level, start=start + c, steps=steps, nvisits=nvis,
        killed_at=killed + c, kill_bound=kbound, skip_bound=skip, moves=moves,
        visits=visits if cfg.record_visits else None,
        visit_ptr=ptr if cfg.record_visits else None,
    )
    return InterlacementSample(
        cfg, first.reshape(w.shape), counts, traj,
        float(kbound.sum() + skip.sum()), replica,
    )


def sample_interlacement(config: SamplerConfig, eq: EquilibriumMeasure, G=None,
                         replica: int = 0) -> InterlacementSample:
    """One coupled sample of the interlacement trace on ``config.window``.

    ``eq`` must be the equilibrium measure of the window's site set.  ``G``
    is accepted for interface symmetry; the kill test uses the far-field
    Green bound and does not need the table.
    """
    return sample_prepared(prepare(config, eq), replica)


def vacant_set(sample: InterlacementSample, level_index: int) -> set:
    return sample.window.points_of(sample.vacant_mask(level_index))


def dilate_occupied(sample: InterlacementSample, level_index: int, R: int) -> np.ndarray:
    """Occupied mask fattened by l-inf radius R, restricted to the window."""
    if R < 0:
        raise ValueError("R must be nonnegative")
    occ = sample.occupied_mask(level_index)
    if R == 0:
        return occ.copy()
    return ndimage.maximum_filter(occ, size=2 * R + 1, mode="constant", cval=False)


# --------------------------------------------------------------------------
# map-then-merge over replicas


def _shard(args):
    prep, lo, hi, fn = args
    return [fn(sample_prepared(prep, r)) for r in range(lo, hi)]


def map_replicas(prep: Prepared, fn: Callable, replicas: Sequence[int] | range | None = None,
                 workers: int = 1) -> list:
    """``[fn(sample_r) for r in replicas]``; identical for any worker count.

    Shards are contiguous blocks of replica indices and results are merged
    in index order.  ``fn`` must be picklable when ``workers > 1``.
    """
    reps = list(range(prep.config.replica_count) if replicas is None else replicas)
    if workers <= 1 or len(reps) < 2:
        return [fn(sample_prepared(prep, r)) for r in reps]
    blocks = np.array_split(np.asarray(reps), workers)
    tasks = [(prep, int(b[0]), int(b[-1]) + 1, fn) for b in blocks if len(b)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_shard, tasks):
            out.extend(part)
    return out
