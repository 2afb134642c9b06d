"""Connectivity of the vacant set: cluster labels and crossing events.

Labelling runs a union-find (path halving, union by size) over the
nearest-neighbour graph of a boolean site mask.  Each cluster is labelled by
its smallest flat index, which is also its lexicographically smallest site,
so labels do not depend on the order of unions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numba as nb
import numpy as np
from scipy import stats

from .lattice import BoxSpec, Window, interior_boundary_mask

UNLABELLED = -1


@nb.njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@nb.njit(cache=True)
def _label_flat(mask, shape):
    n = mask.shape[0]
    d = shape.shape[0]
    strides = np.empty(d, dtype=np.int64)
    s = 1
    for k in range(d - 1, -1, -1):
        strides[k] = s
        s *= shape[k]
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    coord = np.zeros(d, dtype=np.int64)
    for i in range(n):
        if mask[i]:
            # backward neighbours only; each edge is seen once
            for k in range(d):
                if coord[k] > 0:
                    j = i - strides[k]
                    if mask[j]:
                        a = _find(parent, i)
                        b = _find(parent, j)
                        if a != b:
                            if size[a] < size[b]:
                                a, b = b, a
                            parent[b] = a
                            size[a] += size[b]
        # advance the C-order coordinate counter
        k = d - 1
        while k >= 0:
            coord[k] += 1
            if coord[k] < shape[k]:
                break
            coord[k] = 0
            k -= 1
    labels = np.full(n, -1, dtype=np.int64)
    canon = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if mask[i]:
            r = _find(parent, i)
            if canon[r] < 0:
                canon[r] = i  # first visit in flat order is the minimum
            labels[i] = canon[r]
    return labels


def label_mask(mask: np.ndarray) -> np.ndarray:
    """Canonical cluster labels of a boolean array; -1 off the mask."""
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    shape = np.asarray(mask.shape, dtype=np.int64)
    return _label_flat(mask.reshape(-1), shape).reshape(mask.shape)


@dataclass
class ClusterLabeling:
    window: Window
    labels: np.ndarray  # window-shaped; canonical flat index, or -1 if occupied
    cluster_count: int
    largest_cluster_size: int

    def label_of(self, x: Sequence[int]) -> int:
        if x not in self.window:
            raise ValueError(f"point {tuple(x)} outside window")
        return int(self.labels.reshape(-1)[self.window.flat_index(x)])

    def site_labels(self) -> dict:
        """Mapping vacant site -> canonical representative site."""
        w = self.window
        flat = self.labels.reshape(-1)
        idx = np.flatnonzero(flat >= 0)
        pts = w.points(idx)
        reps = w.points(flat[idx])
        return {tuple(map(int, p)): tuple(map(int, r)) for p, r in zip(pts, reps)}

    def sizes(self) -> dict:
        flat = self.labels.reshape(-1)
        lab, cnt = np.unique(flat[flat >= 0], return_counts=True)
        return dict(zip(lab.tolist(), cnt.tolist()))


def _labeling(window: Window, labels: np.ndarray) -> ClusterLabeling:
    flat = labels.reshape(-1)
    vac = flat[flat >= 0]
    if vac.size == 0:
        return ClusterLabeling(window, labels, 0, 0)
    counts = np.bincount(vac)
    nz = counts[counts > 0]
    return ClusterLabeling(window, labels, int(nz.size), int(nz.max()))


def label_clusters(vacant, window: Window) -> ClusterLabeling:
    """Label the clusters of ``vacant`` (a point set or window-shaped mask)."""
    if isinstance(vacant, np.ndarray) and vacant.dtype == np.bool_:
        if vacant.shape != window.shape:
            raise ValueError("mask shape does not match the window")
        mask = vacant
    else:
        mask = window.mask_of(vacant)
    return _labeling(window, label_mask(mask))


def _label_set(labeling: ClusterLabeling, A: Iterable[Sequence[int]]) -> np.ndarray:
    pts = np.asarray(list(A), dtype=np.int64).reshape(-1, labeling.window.dim)
    if len(pts) == 0:
        return np.empty(0, dtype=np.int64)
    lab = labeling.labels.reshape(-1)[labeling.window.flat_indices(pts)]
    return np.unique(lab[lab >= 0])


def connected(labeling: ClusterLabeling, A, B) -> bool:
    """True iff some vacant site of A and some vacant site of B share a cluster."""
    return bool(np.intersect1d(_label_set(labeling, A), _label_set(labeling, B)).size)


def crosses(vacant: np.ndarray, source: np.ndarray, target: np.ndarray) -> bool:
    """Is some vacant ``source`` site joined to a vacant ``target`` site in ``vacant``?

    All three are boolean arrays of one shape; paths stay inside the array.
    """
    lab = label_mask(vacant)
    a = np.unique(lab[source & vacant])
    if a.size == 0:
        return False
    b = lab[target & vacant]
    return bool(np.isin(b, a, assume_unique=False).any())


def box_crossing(vacant_mask: np.ndarray, window: Window, inner: BoxSpec, outer: BoxSpec) -> bool:
    """``inner`` joined to the interior boundary of ``outer`` by a vacant path in ``outer``."""
    sl = window.box_slices(outer)
    sub = vacant_mask[sl]
    src = np.zeros(sub.shape, dtype=bool)
    rel = tuple(
        slice(i - o, i - o + inner.side) for i, o in zip(inner.lower, outer.lower)
    )
    if not outer.contains_box(inner):
        raise ValueError("inner box exceeds outer box")
    src[rel] = True
    tgt = interior_boundary_mask(np.ones(sub.shape, dtype=bool))
    return crosses(sub, src, tgt)


@nb.njit(cache=True)
def _box_crossings(vac, shape, inner_lo, inner_side, outer_lo, outer_side):
    """BFS per box pair; arrays hold window-relative lower corners."""
    d = shape.shape[0]
    strides = np.empty(d, dtype=np.int64)
    s = 1
    for k in range(d - 1, -1, -1):
        strides[k] = s
        s *= shape[k]
    nbox = inner_lo.shape[0]
    out = np.zeros(nbox, dtype=np.bool_)
    stamp = np.zeros(vac.shape[0], dtype=np.int64)
    queue = np.empty(vac.shape[0], dtype=np.int64)
    c = np.empty(d, dtype=np.int64)
    for b in range(nbox):
        tag = b + 1
        head = 0
        tail = 0
        ns = inner_side[b]
        # seed with the vacant sites of the inner box
        total = 1
        for k in range(d):
            total *= ns
        for t in range(total):
            r = t
            idx = 0
            for k in range(d - 1, -1, -1):
                idx += (inner_lo[b, k] + r % ns) * strides[k]
                r //= ns
            if vac[idx] and stamp[idx] != tag:
                stamp[idx] = tag
                queue[tail] = idx
                tail += 1
        lo = outer_lo[b]
        hi_side = outer_side[b]
        found = False
        while head < tail and not found:
            i = queue[head]
            head += 1
            r = i
            for k in range(d - 1, -1, -1):
                c[k] = r % shape[k]
                r //= shape[k]
            for k in range(d):
                rel = c[k] - lo[k]
                if rel == 0 or rel == hi_side - 1:
                    found = True
                    break
            if found:
                break
            for k in range(d):
                for sgn in (-1, 1):
                    j = i + sgn * strides[k]
                    if vac[j] and stamp[j] != tag:
                        stamp[j] = tag
                        queue[tail] = j
                        tail += 1
        out[b] = found
    return out


def box_crossings(vacant_mask: np.ndarray, window: Window, pairs) -> np.ndarray:
    """Vectorised :func:`box_crossing` over ``[(inner, outer), ...]``."""
    pairs = list(pairs)
    if not pairs:
        return np.zeros(0, dtype=bool)
    wb = window.box()
    wlo = np.asarray(window.lower, dtype=np.int64)
    for inner, outer in pairs:
        if not wb.contains_box(outer):
            raise ValueError("box exceeds window")
        if not outer.contains_box(inner):
            raise ValueError("inner box exceeds outer box")
    ilo = np.array([p[0].lower for p in pairs], dtype=np.int64) - wlo
    olo = np.array([p[1].lower for p in pairs], dtype=np.int64) - wlo
    isd = np.array([p[0].side for p in pairs], dtype=np.int64)
    osd = np.array([p[1].side for p in pairs], dtype=np.int64)
    vac = np.ascontiguousarray(vacant_mask, dtype=np.bool_).reshape(-1)
    return _box_crossings(vac, np.asarray(window.shape, dtype=np.int64), ilo, isd, olo, osd)


def crossing_event(sample, level: int, m, hierarchy) -> bool:
    """The crossing event from C_m to the interior boundary of its 3^d block.

    ``hierarchy`` supplies ``box(m)`` and ``tilde_box(m)``; paths are
    confined to the block.
    """
    return box_crossing(sample.vacant_mask(level), sample.window,
                        hierarchy.box(m), hierarchy.tilde_box(m))


def two_point(sample, level: int, x: Sequence[int], y: Sequence[int] | None = None) -> bool:
    """``y`` (default: the window centre) joined to ``x`` inside the window."""
    w = sample.window
    y = tuple(w.center) if y is None else tuple(y)
    for p in (x, y):
        if tuple(p) not in w:
            raise ValueError(f"point {tuple(p)} outside window")
    vac = sample.vacant_mask(level)
    ix, iy = w.flat_index(x), w.flat_index(y)
    flat = vac.reshape(-1)
    if not (flat[ix] and flat[iy]):
        return False
    if ix == iy:
        return True
    lab = label_mask(vac).reshape(-1)
    return bool(lab[ix] == lab[iy])


def ball_to_sphere(vacant_mask: np.ndarray, window: Window, inner_radius: int,
                   outer_radius: int) -> bool:
    """B(c, inner) joined to S(c, outer) by vacant sites of B(c, outer).

    Any path from the inner ball to the sphere meets the sphere before
    leaving B(c, outer), so confining it there loses nothing.
    """
    if not 0 <= inner_radius <= outer_radius <= window.radius:
        raise ValueError("radii must satisfy 0 <= inner <= outer <= window radius")
    c = window.radius
    o = slice(c - outer_radius, c + outer_radius + 1)
    sub = vacant_mask[(o,) * window.dim]
    src = np.zeros(sub.shape, dtype=bool)
    k = outer_radius
    src[(slice(k - inner_radius, k + inner_radius + 1),) * window.dim] = True
    tgt = interior_boundary_mask(np.ones(sub.shape, dtype=bool))
    return crosses(sub, src, tgt)


# --------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, confidence: float = 0.95):
    """Two-sided Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = successes / trials
    den = 1 + z * z / trials
    mid = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if successes == 0 else max(0.0, mid - half)
    hi = 1.0 if successes == trials else min(1.0, mid + half)
    return lo, hi


def wilson_upper(successes: int, trials: int, confidence: float = 0.95) -> float:
    """One-sided Wilson upper bound at the given confidence."""
    return wilson_interval(successes, trials, 2 * confidence - 1)[1]


@dataclass
class CrossingEstimate:
    successes: int
    trials: int
    u: float = float("nan")
    geometry: str = ""
    L: int = 0
    confidence: float = 0.95

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")

    @property
    def point_estimate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def interval(self):
        return wilson_interval(self.successes, self.trials, self.confidence)

    @property
    def wilson_low(self) -> float:
        return self.interval[0]

    @property
    def wilson_high(self) -> float:
        return self.interval[1]

    def merge(self, other: "CrossingEstimate") -> "CrossingEstimate":
        if (self.u, self.geometry, self.L) != (other.u, other.geometry, other.L) and not (
            math.isnan(self.u) and math.isnan(other.u)
        ):
            raise ValueError("cannot merge estimates of different events")
        return CrossingEstimate(self.successes + other.successes, self.trials + other.trials,
                                self.u, self.geometry, self.L, self.confidence)

    CSV_HEADER = "u,geometry,L,successes,trials,p,lo,hi"

    def csv_row(self) -> str:
        lo, hi = self.interval
        return ",".join([
            fmt(self.u), self.geometry, str(self.L), str(self.successes), str(self.trials),
            fmt(self.point_estimate), fmt(lo), fmt(hi),
        ])


def fmt(x: float) -> str:
    """12 significant digits, the output format used throughout."""
    return f"{float(x):.12g}"
