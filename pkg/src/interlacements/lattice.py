"""Integer lattice geometry on Z^d: l-infinity balls, spheres, boundaries, windows.

Points are plain tuples of ints.  Point sets are Python sets of such tuples,
or ``(n, d)`` integer arrays where bulk work is needed.  Every enumeration
is lexicographic so downstream results are reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

MIN_DIM = 3
MAX_DIM = 5

Point = tuple


def check_dim(d: int) -> int:
    if not MIN_DIM <= int(d) <= MAX_DIM:
        raise ValueError(f"dimension must be in [{MIN_DIM}, {MAX_DIM}], got {d}")
    return int(d)


def origin(d: int) -> Point:
    return (0,) * d


def unit(d: int, i: int = 0, k: int = 1) -> Point:
    return tuple(k if j == i else 0 for j in range(d))


def linf_norm(x: Sequence[int]) -> int:
    return max(abs(int(c)) for c in x)


def neighbors(x: Sequence[int]) -> Iterator[Point]:
    """The 2d nearest neighbours of ``x``, in a fixed order."""
    x = tuple(x)
    for i in range(len(x)):
        for s in (-1, 1):
            y = list(x)
            y[i] += s
            yield tuple(y)


def ball(center: Sequence[int], r: int) -> list[Point]:
    """Sites of B(center, r) for the l-infinity distance, lexicographic."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    rng = [range(c - r, c + r + 1) for c in center]
    return [tuple(p) for p in itertools.product(*rng)]


def sphere(center: Sequence[int], r: int) -> list[Point]:
    """Sites at l-infinity distance exactly ``r`` from ``center``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    c = tuple(center)
    return [p for p in ball(c, r) if max(abs(a - b) for a, b in zip(p, c)) == r]


def ball_array(center: Sequence[int], r: int) -> np.ndarray:
    """``(2r+1)^d x d`` array of B(center, r), rows in lexicographic order."""
    d = len(center)
    axes = [np.arange(c - r, c + r + 1, dtype=np.int64) for c in center]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grid], axis=1).reshape(-1, d)


def linf_distance(A: Iterable[Sequence[int]], B: Iterable[Sequence[int]]) -> int:
    """Mutual l-infinity distance min_{a in A, b in B} |a - b|_inf."""
    a = np.asarray(list(A), dtype=np.int64)
    b = np.asarray(list(B), dtype=np.int64)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty set")
    a = a.reshape(len(a), -1)
    b = b.reshape(len(b), -1)
    best = None
    # blockwise to keep memory bounded on large sets
    for s in range(0, len(a), 2048):
        blk = np.abs(a[s:s + 2048, None, :] - b[None, :, :]).max(axis=2).min()
        best = blk if best is None else min(best, blk)
    return int(best)


def interior_boundary(U: Iterable[Sequence[int]]) -> set[Point]:
    """Sites of U having a nearest neighbour outside U."""
    U = {tuple(p) for p in U}
    return {x for x in U if any(y not in U for y in neighbors(x))}


def outer_boundary(U: Iterable[Sequence[int]]) -> set[Point]:
    """Sites outside U having a nearest neighbour in U."""
    U = {tuple(p) for p in U}
    return {y for x in U for y in neighbors(x) if y not in U}


def interior_boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Interior boundary of a set given as a boolean array (outside = absent)."""
    padded = np.pad(mask, 1, constant_values=False)
    out = np.zeros_like(mask)
    core = tuple(slice(1, -1) for _ in range(mask.ndim))
    for ax in range(mask.ndim):
        for s in (-1, 1):
            out |= ~np.roll(padded, s, axis=ax)[core]
    return mask & out


@dataclass(frozen=True)
class BoxSpec:
    """Half-open box ``lower + [0, side)^d``."""

    lower: Point
    side: int

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("box side must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def upper(self) -> Point:
        """Inclusive upper corner."""
        return tuple(c + self.side - 1 for c in self.lower)

    def __contains__(self, x) -> bool:
        return all(lo <= c < lo + self.side for c, lo in zip(x, self.lower))

    def sites(self) -> list[Point]:
        rng = [range(c, c + self.side) for c in self.lower]
        return [tuple(p) for p in itertools.product(*rng)]

    def contains_box(self, other: "BoxSpec") -> bool:
        return all(
            lo <= olo and olo + other.side <= lo + self.side
            for lo, olo in zip(self.lower, other.lower)
        )

    def intersects(self, other: "BoxSpec") -> bool:
        return all(
            lo < olo + other.side and olo < lo + self.side
            for lo, olo in zip(self.lower, other.lower)
        )

    def distance(self, other: "BoxSpec") -> int:
        """l-infinity distance between the two site sets."""
        gap = 0
        for lo, olo in zip(self.lower, other.lower):
            hi, ohi = lo + self.side - 1, olo + other.side - 1
            gap = max(gap, olo - hi, lo - ohi, 0)
        return gap


@dataclass(frozen=True)
class Window:
    """The ball B(center, radius); all sampling happens on one of these."""

    center: Point
    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("window radius must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def shape(self) -> tuple:
        return (self.side,) * self.dim

    @property
    def size(self) -> int:
        return self.side ** self.dim

    @property
    def lower(self) -> Point:
        return tuple(c - self.radius for c in self.center)

    def box(self) -> BoxSpec:
        return BoxSpec(self.lower, self.side)

    def __contains__(self, x) -> bool:
        return all(abs(a - c) <= self.radius for a, c in zip(x, self.center))

    def sites(self) -> list[Point]:
        return ball(self.center, self.radius)

    def site_array(self) -> np.ndarray:
        return ball_array(self.center, self.radius)

    def flat_index(self, x: Sequence[int]) -> int:
        if x not in self:
            raise ValueError(f"point {tuple(x)} outside window")
        idx = 0
        for a, lo in zip(x, self.lower):
            idx = idx * self.side + (a - lo)
        return idx

    def flat_indices(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, self.dim)
        rel = pts - np.asarray(self.lower, dtype=np.int64)
        if np.any(rel < 0) or np.any(rel >= self.side):
            raise ValueError("point outside window")
        return np.ravel_multi_index(tuple(rel.T), self.shape)

    def point(self, flat: int) -> Point:
        rel = np.unravel_index(int(flat), self.shape)
        return tuple(int(r) + lo for r, lo in zip(rel, self.lower))

    def points(self, flat: np.ndarray) -> np.ndarray:
        rel = np.stack(np.unravel_index(np.asarray(flat, dtype=np.int64), self.shape), axis=1)
        return rel + np.asarray(self.lower, dtype=np.int64)

    def mask_of(self, pts: Iterable[Sequence[int]]) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        arr = np.asarray(list(pts), dtype=np.int64).reshape(-1, self.dim)
        if len(arr):
            mask.reshape(-1)[self.flat_indices(arr)] = True
        return mask

    def points_of(self, mask: np.ndarray) -> set[Point]:
        return {tuple(int(v) for v in p) for p in self.points(np.flatnonzero(mask.reshape(-1)))}

    def box_slices(self, box: BoxSpec) -> tuple:
        """Array slices of ``box`` inside this window's grid."""
        if not self.box().contains_box(box):
            raise ValueError("box exceeds window")
        return tuple(
            slice(lo - wlo, lo - wlo + box.side) for lo, wlo in zip(box.lower, self.lower)
        )
