import math
from collections import Counter

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from rankfuse._gibbs import LatentLayout
from rankfuse.barc import BARC, BarcConfig, ConfigError, gibbs_update_Z, simulate_rankings
from rankfuse.barcm import (BARCM, DpConfig, _ClusterMarginal, cluster_counts,
                            crp_expected_clusters, gibbs_update_allocation)
from rankfuse.barcw import BARCW, weight_conditional
from rankfuse.core import RankingList
from rankfuse.kernels import DesignBlock


def _partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in _partitions(rest):
        for k in range(len(p)):
            yield p[:k] + [[first] + p[k]] + p[k + 1:]
        yield [[first]] + p


def _labels(part, m):
    q = np.empty(m, dtype=int)
    for k, b in enumerate(sorted(part, key=min)):
        q[b] = k
    return tuple(q)


def _crp_prob(part, m, gamma):
    num = gamma ** len(part) * math.prod(math.factorial(len(b) - 1) for b in part)
    return num / math.prod(gamma + i for i in range(m))


def test_crp_expected_clusters_table_values():
    got = [crp_expected_clusters(69, g) for g in (1 / 69, 69 ** -0.5, 1.0, 69 ** 0.5)]
    assert np.allclose(got, [1.069, 1.557, 4.819, 18.986], atol=1e-3)
    assert crp_expected_clusters(1, 3.0) == 1.0


def test_crp_partition_frequencies_m4(rng):
    m, gamma = 4, 0.8
    block = DesignBlock.without_covariates(2)
    Z = np.zeros((2, m))
    q = np.zeros(m, dtype=int)
    counts = Counter()
    N = 30_000
    for _ in range(N):
        q = gibbs_update_allocation(Z, q, block, gamma, rng, likelihood=False)
        counts[tuple(q)] += 1
    parts = list(_partitions(list(range(m))))
    assert len(parts) == 15
    for part in parts:
        p = _crp_prob(part, m, gamma)
        f = counts[_labels(part, m)] / N
        assert abs(f - p) < 4 * math.sqrt(p * (1 - p) / N) + 0.005


def _dense_cluster_logpdf(Zc, block):
    n, c = Zc.shape
    V = block.V
    lam = np.diag(1.0 / block.prior_precision)
    K = V @ lam @ V.T
    cov = np.eye(n * c) + np.kron(np.ones((c, c)), K)
    return multivariate_normal(np.zeros(n * c), cov).logpdf(Zc.T.ravel())


def test_cluster_marginal_matches_dense_gaussian(rng):
    n, m = 4, 5
    block = DesignBlock(rng.standard_normal((n, 2)), 1.3, 2.0)
    marg = _ClusterMarginal(block, m)
    Z = rng.standard_normal((n, m)) * 2
    for cols in ([0], [1, 3], [0, 2, 4], list(range(m))):
        Zc = Z[:, cols]
        c = len(cols)
        s = marg.U.T @ Zc.sum(axis=1)
        fast = -0.5 * marg.logdet[c] - 0.5 * (np.sum(Zc ** 2) - marg.G[c] @ s ** 2)
        dense = _dense_cluster_logpdf(Zc, block) + 0.5 * n * c * math.log(2 * math.pi)
        assert fast == pytest.approx(dense, rel=1e-10)


def test_allocation_posterior_matches_enumeration(rng):
    n, m, gamma = 3, 3, 1.0
    block = DesignBlock(rng.standard_normal((n, 1)), 1.0, 1.5)
    Z = rng.standard_normal((n, m))
    Z[:, 1] = Z[:, 0] + 0.1 * rng.standard_normal(n)
    parts = list(_partitions(list(range(m))))
    logw = np.array([math.log(_crp_prob(p, m, gamma))
                     + sum(_dense_cluster_logpdf(Z[:, b], block) for b in p) for p in parts])
    exact = np.exp(logw - logw.max())
    exact /= exact.sum()
    q = np.zeros(m, dtype=int)
    counts = Counter()
    N = 30_000
    for _ in range(N):
        q = gibbs_update_allocation(Z, q, block, gamma, rng)
        counts[tuple(q)] += 1
    for part, p in zip(parts, exact):
        f = counts[_labels(part, m)] / N
        assert abs(f - p) < 5 * math.sqrt(p * (1 - p) / N) + 0.005


def test_allocation_labels_are_canonical(rng):
    block = DesignBlock.without_covariates(3)
    q = gibbs_update_allocation(rng.standard_normal((3, 6)), [7, 7, 2, 9, 2, 4], block, 1.0,
                                rng)
    first = [int(np.flatnonzero(q == k)[0]) for k in range(q.max() + 1)]
    assert first == sorted(first) and q[0] == 0
    assert list(cluster_counts(np.array([[0, 0, 1], [0, 1, 2]]))) == [2, 3]


def test_gibbs_update_Z_respects_orders(rng):
    rk = [RankingList("a", ((2, 0, 1),)), RankingList("b", ((1, 3), (0, 2)))]
    layout = LatentLayout.build(rk, 4)
    Z = layout.initial_latent(rk)
    for _ in range(50):
        Z = gibbs_update_Z(Z, rng.standard_normal(4), rk, rng, layout=layout)
        assert Z[2, 0] > Z[0, 0] > Z[1, 0]
        assert Z[1, 1] > Z[3, 1] and Z[0, 1] > Z[2, 1]
    assert layout.is_consistent(Z)


def _small_problem(seed=0, n=8, m=6, sigma=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    mu = X @ np.array([2.0, -1.0])
    return X, mu, simulate_rankings(mu, sigma, m, rng=rng)


def test_barc_deterministic_and_parallel_equal():
    X, _, rk = _small_problem()
    kw = dict(n_iter=300, burn_in=50, n_chains=2, random_state=3)
    a = BARC(n_jobs=1, **kw).fit(rk, X).draws_
    b = BARC(n_jobs=1, **kw).fit(rk, X).draws_
    c = BARC(n_jobs=2, **kw).fit(rk, X).draws_
    assert np.array_equal(a.centered_mu, b.centered_mu)
    assert np.array_equal(a.centered_mu, c.centered_mu)
    assert a.n_draws == 500 and list(np.unique(a.chain)) == [0, 1]


def test_barc_recovers_order_and_coefficient_signs():
    X, mu, rk = _small_problem(n=10, m=20, sigma=0.5)
    est = BARC(n_iter=1500, burn_in=300, random_state=1).fit(rk, X)
    assert est.ranking_.order[0] == int(np.argmax(mu))
    assert np.allclose(est.draws_.centered_mu.mean(axis=1), 0.0, atol=1e-10)
    beta = est.draws_.beta.mean(axis=0)
    assert beta[0] > 0 > beta[1]


def test_bar_ablation_without_covariates():
    _, mu, rk = _small_problem()
    est = BARC(n_iter=300, burn_in=50, random_state=0).fit(rk, None, n_entities=8)
    assert est.draws_.model == "bar" and est.draws_.p == 0


def test_config_validation():
    with pytest.raises(ConfigError):
        BarcConfig(iterations=10, burn_in=10)
    with pytest.raises(ConfigError):
        BarcConfig(sigma_alpha=0.0)
    with pytest.raises(ConfigError):
        DpConfig(gamma=0.0)
    assert BarcConfig(iterations=10, burn_in=2, thin=3).n_stored == 3


def test_weight_conditional_formula():
    p = weight_conditional([4.0, 40.0], 10)
    lv = np.array([0.5, 1.0, 2.0])
    for row, rss in zip(p, (4.0, 40.0)):
        ref = lv ** 5 * np.exp(-lv * rss / 2)
        assert np.allclose(row, ref / ref.sum())
    assert p[0, 2] > p[0, 0] and p[1, 0] > p[1, 2]


def test_barcw_single_level_reduces_to_barc():
    X, _, rk = _small_problem()
    kw = dict(n_iter=200, burn_in=20, random_state=5)
    a = BARC(**kw).fit(rk, X).draws_
    b = BARCW(weight_levels=(1.0,), **kw).fit(rk, X)
    assert np.array_equal(a.centered_mu, b.draws_.centered_mu)
    assert np.all(b.weights_ == 1.0)


def test_barcm_outputs():
    X, _, rk = _small_problem(m=5)
    est = BARCM(n_iter=200, burn_in=50, random_state=0).fit(rk, X)
    d = est.draws_
    assert d.allocation.shape == (150, 5)
    assert d.ranker_mu.shape == (150, 5, 8)
    assert est.ranker_scores_.shape == (5, 8)
    assert 1.0 <= est.n_clusters_ <= 5.0
    assert np.allclose(np.diag(est.coclustering_), 1.0)
    # a single cluster for every ranker reproduces the pooled scores
    one = d.allocation.max(axis=1) == 0
    if one.any():
        assert np.allclose(d.ranker_mu[one][:, 0], d.centered_mu[one])


def test_sklearn_params_round_trip():
    est = BARCM(gamma=0.5)
    assert est.get_params()["gamma"] == 0.5
    assert est.set_params(n_iter=10).n_iter == 10
    assert BARCW().get_params()["weight_levels"] == (0.5, 1.0, 2.0)
