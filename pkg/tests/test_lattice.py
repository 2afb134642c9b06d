import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interlacements.lattice import (
    BoxSpec, Window, ball, check_dim, interior_boundary, interior_boundary_mask,
    linf_distance, neighbors, outer_boundary, sphere,
)


def test_dimension_range():
    assert check_dim(3) == 3
    for d in (1, 2, 6):
        with pytest.raises(ValueError):
            check_dim(d)


def test_ball_and_sphere_sizes():
    assert len(ball((0, 0, 0), 2)) == 125
    assert len(sphere((0, 0, 0), 2)) == 125 - 27
    assert sphere((1, 1, 1), 0) == [(1, 1, 1)]


def test_neighbors_count():
    assert sorted(neighbors((0, 0, 0))) == sorted(
        [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)])


def test_boundaries_of_ball():
    B = ball((0, 0, 0), 2)
    assert interior_boundary(B) == set(sphere((0, 0, 0), 2))
    # outer boundary: faces of B(0,3) without edges or corners
    ob = outer_boundary(B)
    assert len(ob) == 6 * 25
    assert all(max(map(abs, p)) == 3 for p in ob)


def test_boundary_mask_matches_sets():
    rng = np.random.default_rng(3)
    w = Window((0, 0, 0), 3)
    mask = rng.random(w.shape) < 0.6
    got = w.points_of(interior_boundary_mask(mask))
    assert got == interior_boundary(w.points_of(mask))


def test_linf_distance():
    assert linf_distance([(0, 0, 0)], [(3, -1, 2)]) == 3
    assert linf_distance(ball((0, 0, 0), 1), ball((5, 0, 0), 1)) == 3


def test_box_relations():
    a = BoxSpec((0, 0, 0), 4)
    b = BoxSpec((1, 1, 1), 2)
    c = BoxSpec((4, 0, 0), 2)
    assert a.contains_box(b) and not b.contains_box(a)
    assert not a.intersects(c) and a.distance(c) == 1
    assert a.upper == (3, 3, 3)
    assert len(a.sites()) == 64


@settings(max_examples=50, deadline=None)
@given(st.tuples(*[st.integers(-5, 5)] * 3), st.integers(0, 3), st.data())
def test_window_index_roundtrip(center, r, data):
    w = Window(center, r)
    x = tuple(data.draw(st.integers(c - r, c + r)) for c in center)
    i = w.flat_index(x)
    assert w.point(i) == x
    assert w.flat_indices(np.array([x]))[0] == i


def test_window_rejects_outside_point():
    w = Window((0, 0, 0), 1)
    with pytest.raises(ValueError):
        w.flat_index((2, 0, 0))
    with pytest.raises(ValueError):
        w.box_slices(BoxSpec((0, 0, 0), 3))
