"""Counter-based random streams and Poisson sampling.

Every replica owns a Philox stream whose key depends on ``(seed, stream)``
and whose counter starts at a block reserved for the replica index, so a
replica's draws never depend on which worker ran it or in what order.
"""

from __future__ import annotations

import functools
import math

import numba as nb
import numpy as np

POISSON_INVERSION_MAX = 30.0


@functools.lru_cache(maxsize=256)
def _key_words(seed: int, stream: int) -> tuple:
    ss = np.random.SeedSequence(entropy=seed & (2**64 - 1), spawn_key=(stream,))
    return tuple(int(v) for v in ss.generate_state(2, dtype=np.uint64))


def stream_key(seed: int, stream: int = 0) -> np.ndarray:
    return np.array(_key_words(int(seed), int(stream)), dtype=np.uint64)


def replica_generator(seed: int, replica: int, stream: int = 0) -> np.random.Generator:
    """Generator for one replica; independent of every other (seed, stream, replica)."""
    if replica < 0:
        raise ValueError("replica index must be nonnegative")
    counter = np.array([0, 0, replica, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=stream_key(seed, stream), counter=counter))


@nb.njit(cache=True)
def poisson(rng, mean):
    """Poisson variate: inversion below mean 30, PTRS rejection above."""
    if mean <= 0.0:
        return 0
    if mean < POISSON_INVERSION_MAX:
        u = rng.random()
        k = 0
        p = math.exp(-mean)
        cdf = p
        while u > cdf:
            k += 1
            p *= mean / k
            cdf += p
            if p < 1e-300 and k > mean:
                break
        return k
    # Hormann's transformed rejection with squeeze
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        U = rng.random() - 0.5
        V = rng.random()
        us = 0.5 - abs(U)
        k = int(math.floor((2.0 * a / us + b) * U + mean + 0.43))
        if us >= 0.07 and V <= vr:
            return k
        if k < 0 or (us < 0.013 and V > us):
            continue
        lhs = math.log(V) + math.log(invalpha) - math.log(a / (us * us) + b)
        if lhs <= -mean + k * loglam - math.lgamma(k + 1.0):
            return k


@nb.njit(cache=True)
def _poisson_many(rng, mean, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = poisson(rng, mean)
    return out


def poisson_draws(rng: np.random.Generator, mean: float, n: int) -> np.ndarray:
    return _poisson_many(rng, float(mean), int(n))


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@nb.njit(cache=True)
def _stirling_tail(k):
    """lgamma(k + 1) minus its Stirling approximation."""
    if k < 10:
        return math.lgamma(k + 1.0) - (k + 0.5) * math.log(k + 1.0) + (k + 1.0) - _HALF_LOG_2PI
    k1 = 1.0 / (k + 1.0)
    k2 = k1 * k1
    return (1.0 / 12 - (1.0 / 360 - k2 / 1260) * k2) * k1


@nb.njit(cache=True)
def _binomial_inversion(rng, n, p):
    q = 1.0 - p
    s = p / q
    a = (n + 1) * s
    r = q ** n
    u = rng.random()
    k = 0
    while u > r:
        u -= r
        k += 1
        if k > n:
            # rounding left a sliver of mass; redraw
            u = rng.random()
            k = 0
            r = q ** n
            continue
        r *= a / k - s
    return k


@nb.njit(cache=True, inline="never")
def _btrd_tail(rng, n, p, v, spq, b, a, c, vr):
    """Rejection part of BTRD, entered with the first uniform ``v`` already drawn."""
    npq = spq * spq
    alpha = (2.83 + 5.1 / b) * spq
    urvr = 0.86 * vr
    m = int(math.floor((n + 1) * p))
    r = p / (1.0 - p)
    nr = (n + 1) * r
    while True:
        if v <= urvr:
            u = v / vr - 0.43
            return int(math.floor((2.0 * a / (0.5 - abs(u)) + b) * u + c))
        if v >= vr:
            u = rng.random() - 0.5
        else:
            u = v / vr - 0.93
            u = math.copysign(0.5, u) - u
            v = rng.random() * vr
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + c))
        if 0 <= k <= n:
            v = v * alpha / (a / (us * us) + b)
            km = abs(k - m)
            if km <= 15:
                f = 1.0
                if m < k:
                    for i in range(m + 1, k + 1):
                        f *= nr / i - r
                elif m > k:
                    for i in range(k + 1, m + 1):
                        v *= nr / i - r
                if v <= f:
                    return k
            else:
                v = math.log(v)
                rho = (km / npq) * (((km / 3.0 + 0.625) * km + 1.0 / 6) / npq + 0.5)
                t = -km * km / (2.0 * npq)
                if v < t - rho:
                    return k
                if v <= t + rho:
                    nm = n - m + 1
                    h = ((m + 0.5) * math.log((m + 1) / (r * nm))
                         + _stirling_tail(m) + _stirling_tail(n - m))
                    nk = n - k + 1
                    if v <= (h + (n + 1) * math.log(nm / nk)
                             + (k + 0.5) * math.log(nk * r / (k + 1))
                             - _stirling_tail(k) - _stirling_tail(n - k)):
                        return k
        v = rng.random()


@nb.njit(cache=True)
def _btrd(rng, n, p):
    """Hormann's transformed rejection with decomposition, n p >= 10, p <= 1/2.

    The immediate-acceptance branch is kept small so it inlines into callers;
    the rest lives in :func:`_btrd_tail`.
    """
    spq = math.sqrt(n * p * (1.0 - p))
    b = 1.15 + 2.53 * spq
    a = -0.0873 + 0.0248 * b + 0.01 * p
    c = n * p + 0.5
    vr = 0.92 - 4.2 / b
    v = rng.random()
    if v <= 0.86 * vr:
        u = v / vr - 0.43
        return int(math.floor((2.0 * a / (0.5 - abs(u)) + b) * u + c))
    return _btrd_tail(rng, n, p, v, spq, b, a, c, vr)


@nb.njit(cache=True)
def binomial(rng, n, p):
    """Binomial(n, p) variate; inversion for n min(p, 1-p) < 10, else BTRD."""
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    flip = p > 0.5
    pp = 1.0 - p if flip else p
    k = _binomial_inversion(rng, n, pp) if n * pp < 10.0 else _btrd(rng, n, pp)
    return n - k if flip else k


@nb.njit(cache=True)
def _binomial_many(rng, n, p, size):
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        out[i] = binomial(rng, n, p)
    return out


def binomial_draws(rng: np.random.Generator, n: int, p: float, size: int) -> np.ndarray:
    return _binomial_many(rng, int(n), float(p), int(size))
