import math

import numpy as np
import pytest

from interlacements.capacity import capacity
from interlacements.lattice import Window, ball, interior_boundary_mask
from interlacements.rng import replica_generator
from interlacements.sampler import (
    NEVER, SamplerConfig, _jump, default_kill_radius, dilate_occupied, make_sampler,
    map_replicas, sample_interlacement, sample_prepared, skip_lengths, window_measure,
)


def _occupied_count(s):
    return int(s.occupied_mask(s.n_levels - 1).sum())


def test_zero_level_is_empty():
    prep = make_sampler(Window((0, 0, 0), 2), [0.0], seed=1)
    s = sample_prepared(prep, 0)
    assert s.counts.sum() == 0
    assert s.vacant_mask(0).all()
    assert s.trajectories == []


def test_config_validation():
    w = Window((0, 0, 0), 2)
    for bad in [(), (1.0, 0.5), (-1.0,), (0.5, 0.5)]:
        with pytest.raises(ValueError):
            SamplerConfig(bad, w)
    with pytest.raises(ValueError, match="kill radius insufficient"):
        SamplerConfig((1.0,), w, kill_radius=2)


def test_reproducible_per_replica():
    prep = make_sampler(Window((0, 0, 0), 3), [0.5, 1.0], seed=5, replica_count=3)
    a = sample_prepared(prep, 2)
    b = sample_prepared(prep, 2)
    c = sample_prepared(prep, 1)
    assert np.array_equal(a.first_level, b.first_level)
    assert not np.array_equal(a.first_level, c.first_level)


def test_levels_nested():
    prep = make_sampler(Window((0, 0, 0), 3), [0.25, 0.5, 1.0], seed=2)
    for r in range(20):
        s = sample_prepared(prep, r)
        occ = [s.occupied_mask(k) for k in range(3)]
        assert np.all(occ[0] <= occ[1]) and np.all(occ[1] <= occ[2])
        assert np.all((s.first_level < 3) | (s.first_level == NEVER))


def test_trajectory_records():
    w = Window((1, -2, 0), 2)
    cfg = SamplerConfig((0.5, 2.0), w, seed=3, record_visits=True)
    s = sample_interlacement(cfg, window_measure(w))
    t = s.trajectories
    assert len(t) == s.counts.sum()
    boundary = w.points_of(interior_boundary_mask(np.ones(w.shape, bool)))
    occ = set()
    for rec in t:
        assert rec.start in boundary
        assert rec.visited[0] == rec.start
        assert len(rec.visited) == rec.visited_count
        assert max(abs(a - c) for a, c in zip(rec.killed_at, w.center)) > s.config.window.radius
        occ |= set(rec.visited)
    assert occ == s.occupied(1)
    assert len(s.dump_lines()) == len(t)


def test_single_site_law():
    # P[0 vacant] = exp(-u cap({0})) = exp(-u / g(0))
    u = 1.0
    prep = make_sampler(Window((0, 0, 0), 0), [u], seed=11, replica_count=4000)
    vac = np.array(map_replicas(prep, lambda s: bool(s.vacant_mask(0)[0, 0, 0])))
    p = math.exp(-u * prep.cap)
    se = math.sqrt(p * (1 - p) / len(vac))
    assert abs(vac.mean() - p) < 4 * se


def _inner_vacant(s):
    vac = s.vacant_mask(0)
    return bool(vac[1:4, 1:4, 1:4].all()), bool(vac[2, 2, 2])


def test_vacancy_law_inside_larger_window(G3):
    # K strictly inside the window, so the answer depends on the walk paths
    u, n = 0.5, 20000
    prep = make_sampler(Window((0, 0, 0), 2), [u], seed=12, replica_count=n, G=G3)
    res = np.array(map_replicas(prep, _inner_vacant))
    for hits, K in zip(res.T, [ball((0, 0, 0), 1), [(0, 0, 0)]]):
        p = math.exp(-u * capacity(K, G3))
        se = math.sqrt(p * (1 - p) / n)
        assert abs(hits.mean() - p) < 4 * se


def test_workers_do_not_change_results():
    prep = make_sampler(Window((0, 0, 0), 2), [1.0], seed=4, replica_count=6)
    a = map_replicas(prep, _occupied_count, workers=1)
    b = map_replicas(prep, _occupied_count, workers=2)
    assert a == b


def test_kill_radius_and_budget():
    w = Window((0, 0, 0), 3)
    prep = make_sampler(w, [1.0], seed=0)
    assert prep.kill_radius == default_kill_radius(w, prep.cap, 1e-5)
    assert prep.kill_radius > w.radius
    s = sample_prepared(prep, 0)
    assert 0 <= s.bias_budget <= s.counts.sum() * (1e-5 + 1e-8 * 1e6)


def test_jump_law():
    rng = replica_generator(9, 0)
    n, reps = 301, 20000
    out = np.empty((reps, 3), dtype=np.int64)
    for i in range(reps):
        x = np.zeros(3, dtype=np.int64)
        _jump(rng, x, 3, n)
        out[i] = x
    assert np.all(np.abs(out).sum(axis=1) % 2 == n % 2)
    assert np.all(np.abs(out).sum(axis=1) <= n)
    var = out.var(axis=0)
    assert np.allclose(var, n / 3, rtol=0.05)
    assert np.allclose(out.mean(axis=0), 0, atol=0.5)


def test_skip_table_monotone():
    t = skip_lengths(3, 1e-8)
    assert t[1] == 0
    assert np.all(np.diff(t[1:]) >= 0)
    # a stretch of t[D] steps should very rarely move one coordinate by D
    D = 200
    assert 0 < t[D] < D * D


def test_dilation():
    prep = make_sampler(Window((0, 0, 0), 3), [0.3], seed=8)
    s = sample_prepared(prep, 0)
    d1 = dilate_occupied(s, 0, 1)
    assert np.all(s.occupied_mask(0) <= d1)
    assert np.array_equal(dilate_occupied(s, 0, 0), s.occupied_mask(0))
    with pytest.raises(ValueError):
        dilate_occupied(s, 0, -1)
