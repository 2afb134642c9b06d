"""End-to-end acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed together at the end of the
run.  The Monte Carlo criteria are slow (tens of minutes in total).
"""

import itertools
import math
import time

import numpy as np
import pytest

from interlacements.capacity import capacity
from interlacements.clusters import label_mask, wilson_interval
from interlacements.estimators import (
    alpha_fit, connectivity_curve, convex_increasing, d3_lower_check, stretched_fit,
    synthetic_curve,
)
from interlacements.green import cached_table, green_eval, harmonic_residual, time_sum
from interlacements.lattice import Window, ball
from interlacements.renorm import (
    CertParams, ScaleHierarchy, bound_check, certify, check_tree, enumerate_trees,
    lemma21_witness, theorem_params, tree_count, verify_descendant_geometry,
)
from interlacements.sampler import make_sampler, map_replicas, sample_prepared
from oracles import bfs_components

LOG2 = math.log(2)


# ---------------------------------------------------------------- AC1

def test_ac1_green_exactness(acceptance):
    t = time.perf_counter()
    g0 = green_eval(3, (0, 0, 0))
    oracle, _ = time_sum((0, 0, 0), 10 ** 4)
    T = cached_table(3, 6)
    worst = max(harmonic_residual(T, x) for x in itertools.product(range(-5, 6), repeat=3))
    dt = time.perf_counter() - t
    ok = abs(g0 - oracle) <= 1e-4 and worst <= 1e-8 and dt < 60
    acceptance("AC1", ok, f"|g0 - time_sum| = {abs(g0 - oracle):.2e}, "
                          f"max residual = {worst:.2e}, {dt:.1f} s")
    assert ok


# ---------------------------------------------------------------- AC2

def test_ac2_capacity_identities(acceptance):
    t = time.perf_counter()
    G = cached_table(3, 32)
    g0 = G.g0()
    single = abs(capacity([(0, 0, 0)], G) * g0 - 1)
    rng = np.random.default_rng(2)
    pair_err = 0.0
    for _ in range(50):
        x = tuple(int(v) for v in rng.integers(-6, 7, 3))
        y = tuple(int(v) for v in rng.integers(-6, 7, 3))
        while y == x:
            y = tuple(int(v) for v in rng.integers(-6, 7, 3))
        diff = tuple(a - b for a, b in zip(x, y))
        pair_err = max(pair_err, abs(capacity([x, y], G) - 2 / (g0 + G(diff))))
    sub_ok = True
    for _ in range(100):
        A = {tuple(int(v) for v in p) for p in rng.integers(-4, 5, (int(rng.integers(1, 12)), 3))}
        B = {tuple(int(v) for v in p) for p in rng.integers(-4, 5, (int(rng.integers(1, 12)), 3))}
        sub_ok &= capacity(A | B, G) <= capacity(A, G) + capacity(B, G) + 1e-9
    Ls = [2, 4, 8, 16]
    caps = [capacity(ball((0, 0, 0), L), G) for L in Ls]
    slope = float(np.polyfit(np.log(Ls), np.log(caps), 1)[0])
    dt = time.perf_counter() - t
    ok = single <= 1e-8 and pair_err <= 1e-8 and sub_ok and 0.8 <= slope <= 1.2 and dt < 300
    acceptance("AC2", ok, f"point {single:.1e}, pairs {pair_err:.1e}, subadditive {sub_ok}, "
                          f"ball slope {slope:.3f}, {dt:.1f} s")
    assert ok


# ---------------------------------------------------------------- AC3

def _ball_vacant(s):
    return (bool(s.vacant_mask(0).all()), bool(s.vacant_mask(1).all()), s.bias_budget)


def test_ac3_sampler_law(acceptance):
    G = cached_table(3, 12)
    K = ball((0, 0, 0), 1)
    cap = capacity(K, G)
    n = 2 * 10 ** 5
    us = (0.5, 1.5)
    t = time.perf_counter()
    # both levels come from one coupled run; each marginal has the target law
    prep = make_sampler(Window((0, 0, 0), 1), us, seed=3, replica_count=n, G=G)
    res = map_replicas(prep, _ball_vacant)
    dt = time.perf_counter() - t
    hits = np.array([r[:2] for r in res]).sum(axis=0)
    bias = float(np.mean([r[2] for r in res]))
    oks, parts = [], []
    for k, u in enumerate(us):
        exact = math.exp(-u * cap)
        lo, hi = wilson_interval(int(hits[k]), n, 0.99)
        oks.append(lo - bias <= exact <= hi + bias)
        parts.append(f"u={u}: p_hat={hits[k] / n:.5f} exact={exact:.5f} "
                     f"band=[{lo - bias:.5f}, {hi + bias:.5f}]")
    ok = all(oks) and dt < 300
    acceptance("AC3", ok, "; ".join(parts) + f"; bias_budget={bias:.1e}; {dt:.0f} s")
    assert ok


# ---------------------------------------------------------------- AC4

def test_ac4_coupling(acceptance):
    H = ScaleHierarchy(2, 10, 3, depth=1, strict_mode=False)
    m = H.root(1)
    labels = [m] + H.h1_set(m) + H.h2_set(m)
    pairs = [(H.box(x), H.tilde_box(x)) for x in labels]
    from interlacements.clusters import box_crossings

    us = (0.25, 0.5, 1.0)
    prep = make_sampler(H.window_for(m), us, seed=4, replica_count=1000)
    nested = monotone = True
    crossings = np.zeros(len(us))
    for r in range(1000):
        s = sample_prepared(prep, r)
        occ = [s.occupied_mask(k) for k in range(3)]
        nested &= all(not np.any(a & ~b) for a, b in zip(occ, occ[1:]))
        ind = np.array([box_crossings(s.vacant_mask(k), s.window, pairs) for k in range(3)])
        monotone &= bool(np.all(ind[1:] <= ind[:-1]))
        crossings += ind.sum(axis=1)
    ok = nested and monotone
    acceptance("AC4", ok, f"nested {nested}, indicators nonincreasing {monotone}, "
                          f"mean crossings per sample {np.round(crossings / 1000, 1).tolist()}")
    assert ok


# ---------------------------------------------------------------- AC5

def test_ac5_cluster_oracle(acceptance):
    rng = np.random.default_rng(5)
    w = Window((0, 0, 0), 8)
    mismatches = 0
    for i in range(1000):
        mask = rng.random(w.shape) < rng.uniform(0.1, 0.9)
        mismatches += not np.array_equal(label_mask(mask), bfs_components(mask))
    ok = mismatches == 0
    acceptance("AC5", ok, f"{mismatches} mismatches in 1000 patterns on B(0,8)")
    assert ok


# ---------------------------------------------------------------- AC6

def test_ac6_renormalisation_geometry(acceptance):
    H = ScaleHierarchy(2, 10, 3, depth=1, strict_mode=False)
    m = H.root(1)
    h1_ok = H.h1 == len(H.h1_set(m)) == 10 ** 3 - 8 ** 3
    geo = verify_descendant_geometry(m, H)
    enumerated = sum(1 for _ in enumerate_trees(m, H))
    count_ok = enumerated == tree_count(1, H) == 1_057_984
    bound_ok = bound_check(1, H)
    ok = h1_ok and geo["ok"] and count_ok and bound_ok
    acceptance("AC6", ok, f"h1={H.h1}, pairs={geo['pairs']} overlapping={geo['overlapping_pairs']} "
                          f"contained={geo['contained']}, trees={enumerated}, bound {bound_ok}")
    assert ok


# ---------------------------------------------------------------- AC7

def test_ac7_inclusion(acceptance):
    H = ScaleHierarchy(2, 10, 3, depth=1, strict_mode=False)
    m = H.root(1)
    u = 3.5
    prep = make_sampler(H.window_for(m), [u], seed=7, replica_count=500)
    positives = failures = 0
    for r in range(500):
        holds, tree = lemma21_witness(sample_prepared(prep, r), 0, m, H)
        if not holds:
            failures += 1
        elif tree is not None:
            positives += 1
            failures += not check_tree(tree, m, H)
    ok = positives >= 50 and failures == 0
    acceptance("AC7", ok, f"u={u}: {positives}/500 crossings, {failures} without a witness tree")
    assert ok


# ---------------------------------------------------------------- AC8

def test_ac8_certifier_arithmetic(acceptance):
    q = 100.0 ** -1
    hand = 1.0 * math.exp(1.0 * q * (1 / (1 - 4 * q) + 1 / (1 - 2 * q)))
    res = certify(CertParams(u0=1.0, r0=1, K0=1.0, c0=1.0, c1=1.0, c2=1.0, d=3, L0=1,
                             ell0=100), 1e-9, n_max=30)
    uinf_ok = abs(res.u_inf - hand) <= 1e-9
    good = certify(CertParams(u0=1.0, r0=40, K0=10.0, c0=1.0, c1=1.0, c2=1.0, d=3, L0=1,
                              ell0=100), 1e-6, n_max=30)
    K = good.K_n
    rec_ok = (good.conditions_ok and len(K) == 31
              and all(a >= b for a, b in zip(K, K[1:]))
              and min(K) >= 10.0 - LOG2
              and all(lb == -(10.0 - LOG2) * 2 ** n for n, lb in enumerate(good.log_bound_n)))
    r0, K0, ell0 = theorem_params(0.5, 1, 3)
    c0 = ScaleHierarchy(1, ell0, 3).default_c0()
    tp_ok = (r0 == 49 and ell0 == 200 * (math.floor(1 ** (0.5 / 6)) + 1)
             and abs(K0 - (math.log(c0 * ell0 ** 4) + 2 * LOG2)) <= 1e-12)
    ok = uinf_ok and rec_ok and tp_ok
    acceptance("AC8", ok, f"u_inf err {abs(res.u_inf - hand):.1e}, K_n recursion {rec_ok}, "
                          f"theorem params (r0, ell0) = ({r0}, {ell0})")
    assert ok


# ---------------------------------------------------------------- AC9

def test_ac9_decay_discrimination(acceptance):
    t = time.perf_counter()
    Ls = [4, 8, 16, 32, 64]
    a = alpha_fit(synthetic_curve(Ls, lambda L: L ** -2.0)).alpha_hat
    r = stretched_fit(synthetic_curve(Ls, lambda L: math.exp(-L ** 0.5))).rho_hat
    synth_ok = abs(a - 2) <= 0.01 and abs(r - 0.5) <= 0.02
    low, high = connectivity_curve([0.05, 4.5], "annulus", [4, 8, 16, 32], 500, seed=9)
    shape = convex_increasing(high)
    strict = convex_increasing(high, conservative=True)
    dense_ok = bool(np.all(low.p() > 0.9))
    dt = time.perf_counter() - t
    ok = synth_ok and shape["ok"] and dense_ok and dt < 1800
    acceptance("AC9", ok, f"alpha={a:.4f} rho={r:.4f}; u=4.5 p_hat={high.p().round(4).tolist()} "
                          f"convex increasing {shape['ok']} (conservative {strict['ok']}); "
                          f"u=0.05 min p_hat={low.p().min():.3f}; {dt:.0f} s")
    assert ok


# ---------------------------------------------------------------- AC10

def test_ac10_d3_lower_bound(acceptance):
    rows = d3_lower_check(2.0, [8, 16, 32], replicas=200, seed=10)
    mc_ok = all(r.ok for r in rows)
    ratios = [r.cap_log_ratio for r in rows]
    spread = max(ratios) / min(ratios) - 1
    r4 = d3_lower_check(2.0, [16, 32], d=4)
    lin = r4[0].cap_linear_ratio / r4[1].cap_linear_ratio
    ok = mc_ok and spread < 0.3 and abs(lin - 1) <= 0.2
    detail = ", ".join(f"L={r.L}: {r.estimate.point_estimate:.3f} vs {r.exact:.2e} "
                       f"(margin {r.margin:.3f}, sigma {r.sigma:.3f})" for r in rows)
    acceptance("AC10", ok, f"{detail}; cap log L / L spread {spread:.1%}; "
                           f"d=4 cap/L ratio {lin:.3f}")
    assert ok
