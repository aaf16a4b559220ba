"""BARCW: BARC with a per-ranker noise precision (the ranker's weight).

Ranker j's noise is N(0, 1/w_j) with w_j uniform a priori on three levels.
"""

from __future__ import annotations

from functools import partial

import numpy as np
from scipy.special import logsumexp

from ._validation import check_covariates, check_rankings, warn_unranked
from .barc import BARC, BarcConfig, _nrows, _run_chain, run_chains
from .core import CovariateMatrix
from .draws import PosteriorDraws
from .kernels import as_generator

WEIGHT_LEVELS = (0.5, 1.0, 2.0)


def weight_conditional(residual_ss, n: int, levels=WEIGHT_LEVELS) -> np.ndarray:
    """Conditional probabilities of each weight level, one row per ranker.

    Proportional to ``w^(n/2) exp(-w RSS_j / 2)``; computed in log space.
    """
    lv = np.asarray(levels, dtype=float)
    rss = np.atleast_1d(np.asarray(residual_ss, dtype=float))
    logp = 0.5 * n * np.log(lv)[None, :] - 0.5 * rss[:, None] * lv[None, :]
    return np.exp(logp - logsumexp(logp, axis=1, keepdims=True))


def gibbs_update_weights(Z, alpha, beta, rng, X=None, levels=WEIGHT_LEVELS) -> np.ndarray:
    """Independent draw of every ranker's weight given Z and (alpha, beta)."""
    Z = np.asarray(Z, dtype=float)
    mu = np.asarray(alpha, dtype=float)
    if X is not None and np.size(beta):
        mu = mu + np.asarray(X) @ np.asarray(beta)
    return _draw_weights(Z, mu, as_generator(rng), levels)


def _draw_weights(Z, mu, rng, levels=WEIGHT_LEVELS):
    lv = np.asarray(levels, dtype=float)
    if lv.size == 1:
        return np.full(Z.shape[1], lv[0])
    rss = ((Z - mu[:, None]) ** 2).sum(axis=0)
    prob = weight_conditional(rss, Z.shape[0], lv)
    u = rng.random(Z.shape[1])
    idx = (u[:, None] > np.cumsum(prob, axis=1)[:, :-1]).sum(axis=1)
    return lv[idx]


def _weight_step(Z, mu, w, layout, rng, levels=WEIGHT_LEVELS):
    return _draw_weights(Z, mu, rng, levels)


def run_barcw(rankings, X, cfg: BarcConfig, n_chains: int = 1, n_jobs: int = 1,
              levels=WEIGHT_LEVELS) -> PosteriorDraws:
    """Posterior draws under BARCW; ``draws.weights`` holds w per draw."""
    rankings, n = check_rankings(rankings, None if X is None else _nrows(X))
    cov = X if isinstance(X, CovariateMatrix) else check_covariates(X, n, standardize=False)
    warn_unranked(rankings, n, cov.p)
    levels = tuple(sorted(float(v) for v in levels))
    step = partial(_weight_step, levels=levels)
    init = np.full(len(rankings), 1.0 if 1.0 in levels else float(levels[0]))
    draws = run_chains(
        partial(_chain, rankings, cov, cfg, step, init), n_chains, n_jobs)
    draws.model = "barcw"
    return draws


def _chain(rankings, cov, cfg, step, init, c):
    return _run_chain(rankings, cov, cfg, c, weight_step=step, initial_weights=init)


class BARCW(BARC):
    """BARC with learned ranker weights on the levels ``weight_levels``.

    Adds ``weights_`` (posterior mean weight per ranker) after fitting.
    """

    _model = "barcw"

    def __init__(self, sigma_alpha=1.0, sigma_beta=100.0, n_iter=5000, burn_in=1000,
                 thin=1, px=True, n_chains=1, standardize=True, random_state=None,
                 n_jobs=None, weight_levels=WEIGHT_LEVELS):
        super().__init__(sigma_alpha, sigma_beta, n_iter, burn_in, thin, px, n_chains,
                         standardize, random_state, n_jobs)
        self.weight_levels = weight_levels

    def _sample(self, rankings, cov, cfg, n_jobs):
        return run_barcw(rankings, cov, cfg, self.n_chains, n_jobs, tuple(self.weight_levels))

    def fit(self, rankings, X=None, n_entities=None, entity_ids=None):
        super().fit(rankings, X, n_entities, entity_ids)
        self.weights_ = self.draws_.weights.mean(axis=0)
        return self
