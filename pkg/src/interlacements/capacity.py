"""Equilibrium measures, capacities and hitting probabilities of finite sets.

The equilibrium measure solves ``sum_y g(x - y) e_K(y) = 1`` for x in K.
It vanishes on sites whose neighbours all lie in K, so the system is solved
on the interior boundary only; the values at the remaining sites of K then
follow (a walk started inside K must cross the interior boundary to leave).
For l-infinity balls the solve is further reduced to one unknown per
hyperoctahedral orbit about the centre.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from .green import GreenTable, green_upper_far
from .lattice import interior_boundary_mask

log = logging.getLogger(__name__)

DEFAULT_MAX_SIZE = 20_000
NEG_TOL = 1e-10
RESIDUAL_TOL = 1e-8


class SolverError(ValueError):
    """Singular or ill-conditioned equilibrium system."""


@dataclass
class EquilibriumMeasure:
    set_points: np.ndarray  # (n, d), lexicographic
    weights: np.ndarray  # aligned with set_points
    capacity: float
    residual: float = 0.0
    clamped: float = 0.0
    method: str = "dense"
    _support: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.set_points.shape[1]

    @property
    def support_index(self) -> np.ndarray:
        if self._support is None:
            self._support = np.flatnonzero(self.weights > 0)
        return self._support

    @property
    def support_points(self) -> np.ndarray:
        return self.set_points[self.support_index]

    @property
    def support_weights(self) -> np.ndarray:
        return self.weights[self.support_index]

    def weight_of(self, x: Sequence[int]) -> float:
        hit = np.flatnonzero((self.set_points == np.asarray(x)).all(axis=1))
        return float(self.weights[hit[0]]) if len(hit) else 0.0


def as_point_array(K: Iterable[Sequence[int]], d: int | None = None) -> np.ndarray:
    """Deduplicated, lexicographically sorted (n, d) array."""
    arr = np.asarray(K if isinstance(K, np.ndarray) else list(K), dtype=np.int64)
    if arr.size == 0:
        raise ValueError("empty set")
    arr = arr.reshape(len(arr), -1) if d is None else arr.reshape(-1, d)
    return np.unique(arr, axis=0)


def _ball_params(K: np.ndarray):
    """(center, radius) if K is exactly an l-infinity ball, else None."""
    lo, hi = K.min(axis=0), K.max(axis=0)
    side = hi - lo
    if np.any(side != side[0]) or side[0] % 2:
        return None
    if len(K) != (side[0] + 1) ** K.shape[1]:
        return None
    return lo + side[0] // 2, int(side[0] // 2)


def _boundary_of(K: np.ndarray) -> np.ndarray:
    """Boolean flags (aligned with K) for the interior boundary."""
    lo = K.min(axis=0)
    shape = tuple(K.max(axis=0) - lo + 1)
    mask = np.zeros(shape, dtype=bool)
    mask[tuple((K - lo).T)] = True
    return interior_boundary_mask(mask)[tuple((K - lo).T)]


def _check_coverage(K: np.ndarray, G: GreenTable) -> None:
    span = int((K.max(axis=0) - K.min(axis=0)).max())
    if span > G.max_radius:
        raise ValueError(
            f"green table radius {G.max_radius} does not cover displacements up to {span}"
        )


def _green_matrix(A: np.ndarray, B: np.ndarray, G: GreenTable) -> np.ndarray:
    out = np.empty((len(A), len(B)))
    step = max(1, int(2e6 // max(len(B), 1)))
    for s in range(0, len(A), step):
        disp = A[s:s + step, None, :] - B[None, :, :]
        out[s:s + step] = G.lookup(disp.reshape(-1, A.shape[1])).reshape(-1, len(B))
    return out


def _solve_dense(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        c = linalg.cho_factor(M, lower=True, check_finite=False)
        return linalg.cho_solve(c, rhs, check_finite=False)
    except linalg.LinAlgError:
        log.debug("cholesky failed, falling back to pivoted LU")
    try:
        return linalg.solve(M, rhs, check_finite=False)
    except linalg.LinAlgError as exc:
        cond = np.linalg.cond(M)
        raise SolverError(f"singular equilibrium system (condition estimate {cond:.3g})") from exc


def _orbit_solve(S: np.ndarray, center: np.ndarray, G: GreenTable):
    """Solve on orbit classes of a centred, fully symmetric support set."""
    rel = np.sort(np.abs(S - center), axis=1)
    classes, cls = np.unique(rel, axis=0, return_inverse=True)
    cls = cls.reshape(-1)
    nc = len(classes)
    A = np.empty((nc, nc))
    for i, rep in enumerate(classes):
        vals = G.lookup(S - (center + rep))
        A[i] = np.bincount(cls, weights=vals, minlength=nc)
    e_cls = linalg.solve(A, np.ones(nc), check_finite=False)
    resid = float(np.abs(A @ e_cls - 1).max())
    return e_cls[cls], resid


def equilibrium_measure(K, G: GreenTable, max_size: int = DEFAULT_MAX_SIZE) -> EquilibriumMeasure:
    """Equilibrium measure e_K and capacity of the finite set ``K``."""
    K = as_point_array(K, G.dim)
    if len(K) > max_size and _ball_params(K) is None:
        raise ValueError(f"|K| = {len(K)} exceeds the configured cap {max_size}")
    _check_coverage(K, G)
    on_boundary = _boundary_of(K)
    S = K[on_boundary]
    ball = _ball_params(K)
    if ball is not None and len(S) > 512:
        w, resid = _orbit_solve(S, ball[0], G)
        method = "orbit"
    else:
        if len(S) > max_size:
            raise ValueError(f"|K| = {len(S)} exceeds the configured cap {max_size}")
        M = _green_matrix(S, S, G)
        w = _solve_dense(M, np.ones(len(S)))
        resid = float(np.abs(M @ w - 1).max())
        method = "dense"
    if resid > RESIDUAL_TOL:
        raise SolverError(f"equilibrium residual {resid:.3g} above {RESIDUAL_TOL}")
    neg = w[w < 0]
    if neg.size and neg.min() < -NEG_TOL:
        raise SolverError(f"negative equilibrium weight {neg.min():.3g}")
    clamped = float(-neg.sum()) if neg.size else 0.0
    w = np.clip(w, 0.0, None)
    weights = np.zeros(len(K))
    weights[on_boundary] = w
    return EquilibriumMeasure(K, weights, float(weights.sum()), resid, clamped, method)


def capacity(K, G: GreenTable, max_size: int = DEFAULT_MAX_SIZE) -> float:
    return equilibrium_measure(K, G, max_size).capacity


def hitting_probabilities(points, eq: EquilibriumMeasure, G: GreenTable,
                          return_clamp: bool = False):
    """P_x[H_K < oo] for each row of ``points``, clamped to [0, 1]."""
    pts = np.asarray(points, dtype=np.int64).reshape(-1, eq.dim)
    Sp, Sw = eq.support_points, eq.support_weights
    raw = _green_matrix(pts, Sp, G) @ Sw
    out = np.clip(raw, 0.0, 1.0)
    clamp = float(np.abs(out - raw).max()) if len(raw) else 0.0
    if clamp > RESIDUAL_TOL:
        log.warning("hitting probability clamped by %.3g", clamp)
    return (out, clamp) if return_clamp else out


def hitting_probability(x: Sequence[int], eq: EquilibriumMeasure, G: GreenTable,
                        return_clamp: bool = False):
    vals, clamp = hitting_probabilities([x], eq, G, return_clamp=True)
    return (float(vals[0]), clamp) if return_clamp else float(vals[0])


def hitting_bounds(x: Sequence[int], K, G: GreenTable, clamp: bool = True):
    """Lower and upper brackets on P_x[H_K < oo] from Green-function row sums."""
    K = as_point_array(K, G.dim)
    row = _green_matrix(K, K, G).sum(axis=1)
    num = float(_green_matrix(np.asarray([x], dtype=np.int64), K, G).sum())
    lower, upper = num / row.max(), num / row.min()
    if clamp:
        upper = min(upper, 1.0)
    return lower, upper


def return_scale_check(sample, K, G: GreenTable, eq: EquilibriumMeasure | None = None) -> float:
    """Largest hitting probability of K over the sample points."""
    if eq is None:
        eq = equilibrium_measure(K, G)
    return float(hitting_probabilities(sample, eq, G).max())


def far_hitting_upper(dist_from_center: float, eq_radius_euclid: float,
                      cap: float, d: int) -> float:
    """Upper bound on P_x[H_K < oo] for x far from K.

    ``dist_from_center`` is the Euclidean distance from x to a reference
    point and ``eq_radius_euclid`` bounds the distance from that point to any
    site of K.
    """
    r = dist_from_center - eq_radius_euclid
    return cap * green_upper_far(r, d)
