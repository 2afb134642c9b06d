import numpy as np
import pytest
from scipy import stats

from interlacements.rng import binomial_draws, poisson_draws, replica_generator


def test_replica_streams_reproducible_and_distinct():
    a = replica_generator(7, 3).random(5)
    b = replica_generator(7, 3).random(5)
    c = replica_generator(7, 4).random(5)
    d = replica_generator(7, 3, stream=1).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    with pytest.raises(ValueError):
        replica_generator(0, -1)


def _chi2_pvalue(x, dist, lo, hi, bins=40):
    """Chi-square test on ~equal-width bins of [lo, hi] plus both tails."""
    edges = np.unique(np.linspace(lo, hi + 1, bins + 1).astype(int))
    obs = [(x < edges[0]).sum()]
    exp = [dist.cdf(edges[0] - 1)]
    for a, b in zip(edges, edges[1:]):
        obs.append(((x >= a) & (x < b)).sum())
        exp.append(dist.cdf(b - 1) - dist.cdf(a - 1))
    obs.append((x >= edges[-1]).sum())
    exp.append(dist.sf(edges[-1] - 1))
    obs, exp = np.array(obs, float), np.array(exp) * len(x)
    keep = exp > 5
    rest = [obs[~keep].sum(), exp[~keep].sum()]
    obs, exp = np.append(obs[keep], rest[0]), np.append(exp[keep], rest[1])
    if rest[1] == 0:
        obs, exp = obs[:-1], exp[:-1]
    return stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue


@pytest.mark.parametrize("mean", [0.3, 4.0, 29.0, 31.0, 500.0])
def test_poisson_law(mean):
    x = poisson_draws(replica_generator(1, 0), mean, 40000)
    assert x.mean() == pytest.approx(mean, rel=0.05, abs=0.02)
    sd = np.sqrt(mean)
    lo, hi = max(0, int(mean - 3 * sd)), int(mean + 3 * sd) + 1
    assert _chi2_pvalue(x, stats.poisson(mean), lo, hi) > 1e-4


@pytest.mark.parametrize("n,p", [(5, 0.5), (40, 0.1), (1000, 1 / 3), (10 ** 6, 0.9)])
def test_binomial_law(n, p):
    x = binomial_draws(replica_generator(2, 0), n, p, 40000)
    assert x.min() >= 0 and x.max() <= n
    sd = np.sqrt(n * p * (1 - p))
    lo, hi = max(0, int(n * p - 3 * sd)), min(n, int(n * p + 3 * sd) + 1)
    assert _chi2_pvalue(x, stats.binom(n, p), lo, hi) > 1e-4
