import numpy as np
import pytest

from interlacements.capacity import (
    capacity, equilibrium_measure, hitting_bounds, hitting_probabilities, hitting_probability,
)
from interlacements.lattice import ball, ball_array


def test_single_point(G3):
    assert capacity([(0, 0, 0)], G3) * G3.g0() == pytest.approx(1, abs=1e-12)


def test_two_points_closed_form(G3):
    for y in [(1, 0, 0), (2, 3, 1), (0, 0, 5)]:
        expect = 2 / (G3.g0() + G3(y))
        assert capacity([(0, 0, 0), y], G3) == pytest.approx(expect, abs=1e-12)


def test_hitting_is_one_on_set(G3):
    K = ball((0, 0, 0), 1)
    eq = equilibrium_measure(K, G3)
    assert np.allclose(hitting_probabilities(np.array(K), eq, G3), 1.0, atol=1e-10)
    assert 0 < hitting_probability((4, 0, 0), eq, G3) < 1


def test_weights_live_on_interior_boundary(G3):
    eq = equilibrium_measure(ball_array((0, 0, 0), 2), G3)
    centre = np.all(eq.set_points == 0, axis=1)
    assert eq.weights[centre][0] == 0
    assert eq.weights.min() >= 0


def test_orbit_solve_agrees_with_dense(G3):
    from interlacements.green import cached_table

    K = ball_array((0, 0, 0), 4)  # large enough to use the symmetric solve
    eq = equilibrium_measure(K, cached_table(3, 8))
    dense = equilibrium_measure(K, cached_table(3, 8), max_size=10 ** 6)
    assert eq.capacity == pytest.approx(dense.capacity, rel=1e-10)


def test_monotone_and_subadditive(G3):
    A = [(0, 0, 0), (1, 0, 0), (2, 1, 0)]
    B = [(2, 1, 0), (3, 3, 3)]
    cA, cB = capacity(A, G3), capacity(B, G3)
    cU = capacity(sorted(set(A) | set(B)), G3)
    assert cU <= cA + cB + 1e-12
    assert cU >= max(cA, cB) - 1e-12


def test_hitting_bounds_bracket(G3):
    K = ball((0, 0, 0), 1)
    eq = equilibrium_measure(K, G3)
    for x in [(3, 0, 0), (5, 2, 1)]:
        lo, hi = hitting_bounds(x, K, G3)
        assert lo - 1e-12 <= hitting_probability(x, eq, G3) <= hi + 1e-12


def test_table_too_small():
    from interlacements.green import green_table

    with pytest.raises(ValueError):
        capacity([(0, 0, 0), (9, 0, 0)], green_table(3, 3))
