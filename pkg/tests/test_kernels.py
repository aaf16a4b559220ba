import numpy as np
import pytest
from scipy import stats

from rankfuse.kernels import (MIN_WIDTH, DesignBlock, marginal_quadratic_S, posterior_moments,
                              sample_alpha_beta, sample_theta, sample_truncated_normal,
                              truncnorm_draws)


@pytest.mark.parametrize("mean, sd, lo, hi", [
    (0.0, 1.0, -0.5, 1.5),
    (2.0, 0.5, -np.inf, 1.0),
    (0.0, 1.0, 3.0, np.inf),
    (0.0, 1.0, 9.0, np.inf),
    (0.0, 1.0, -np.inf, -12.0),
    (0.0, 1.0, 6.0, 6.05),
    (-1.0, 3.0, -1.0, 0.0),
])
def test_truncnorm_moments(rng, mean, sd, lo, hi):
    N = 200_000
    x = truncnorm_draws(np.full(N, mean), sd, lo, hi, rng)
    assert np.all((x > lo) & (x < hi))
    ref = stats.truncnorm((lo - mean) / sd, (hi - mean) / sd, loc=mean, scale=sd)
    m, v = ref.stats("mv")
    assert abs(x.mean() - m) < 5 * np.sqrt(v / N)
    assert x.var() == pytest.approx(float(v), rel=0.03)


def test_truncnorm_distribution_ks(rng):
    x = truncnorm_draws(np.zeros(20_000), 1.0, 4.0, 6.0, rng)
    ref = stats.truncnorm(4.0, 6.0)
    assert stats.kstest(x, ref.cdf).pvalue > 1e-3


def test_truncnorm_rejects_bad_input(rng):
    with pytest.raises(ValueError):
        truncnorm_draws(0.0, 1.0, 1.0, 1.0, rng)
    with pytest.raises(ValueError):
        truncnorm_draws(0.0, 0.0, 0.0, 1.0, rng)
    # a collapsed interval is widened to MIN_WIDTH on each side, never left empty
    x = sample_truncated_normal(0.0, 1.0, 0.0, 1e-14, rng)
    assert -MIN_WIDTH < x < 1e-14 + MIN_WIDTH


def _random_block(rng, n, p):
    X = rng.standard_normal((n, p))
    return DesignBlock(X, sigma_alpha=rng.uniform(0.5, 2), sigma_beta=rng.uniform(1, 10))


@pytest.mark.parametrize("n, m, p, weighted", [(3, 2, 1, False), (5, 3, 2, True),
                                               (4, 4, 0, False), (5, 1, 3, True)])
def test_S_matches_penalised_least_squares(rng, n, m, p, weighted):
    blk = _random_block(rng, n, p)
    Z = rng.standard_normal((n, m)) * 2
    w = rng.choice([0.5, 1.0, 2.0], m) if weighted else np.ones(m)
    # min_eta sum_j w_j ||Z_j - V eta||^2 + eta' Lambda^-1 eta as one stacked lstsq
    V = blk.V
    rows = [np.sqrt(wj) * V for wj in w] + [np.diag(np.sqrt(blk.prior_precision))]
    rhs = [np.sqrt(wj) * Z[:, j] for j, wj in enumerate(w)] + [np.zeros(n + p)]
    A, y = np.vstack(rows), np.concatenate(rhs)
    eta, *_ = np.linalg.lstsq(A, y, rcond=None)
    oracle = float(np.sum((A @ eta - y) ** 2))
    assert marginal_quadratic_S(Z, w if weighted else None, blk) == pytest.approx(oracle, rel=1e-9)


def test_S_rejects_bad_input(rng):
    blk = _random_block(rng, 3, 1)
    with pytest.raises(ValueError):
        marginal_quadratic_S(np.zeros((3, 0)), None, blk)
    with pytest.raises(ValueError):
        marginal_quadratic_S(np.array([[np.nan], [0], [1]]), None, blk)


def test_posterior_moments_closed_form(rng):
    n, m, p = 4, 3, 2
    blk = _random_block(rng, n, p)
    Z = rng.standard_normal((n, m))
    V = blk.V
    prec = np.diag(blk.prior_precision) + m * V.T @ V
    cov = np.linalg.inv(prec)
    mean = cov @ V.T @ Z.sum(axis=1) / 1.7
    mu, S = posterior_moments(Z, None, 1.7, blk)
    assert np.allclose(mu, mean) and np.allclose(S, cov)


def test_sample_alpha_beta_shapes(rng):
    blk = _random_block(rng, 5, 2)
    a, b = sample_alpha_beta(rng.standard_normal((5, 3)), None, 1.0, blk, rng)
    assert a.shape == (5,) and b.shape == (2,)
    with pytest.raises(ValueError):
        sample_alpha_beta(np.zeros((5, 3)), None, 0.0, blk, rng)


def test_sample_theta_law(rng):
    # theta^2 = S / chi2_dof
    S, dof = 40.0, 20
    t = np.array([sample_theta(S, dof, rng) for _ in range(20_000)])
    q = S / t ** 2
    assert stats.kstest(q, stats.chi2(dof).cdf).pvalue > 1e-3


def test_kernel_eigen_reconstructs(rng):
    blk = _random_block(rng, 6, 2)
    d, U = blk.kernel_eigen()
    K = blk.sigma_alpha ** 2 * np.eye(6) + blk.sigma_beta ** 2 * blk.X @ blk.X.T
    assert np.allclose(U @ np.diag(d) @ U.T, K)
