"""BARC: latent Gaussian scores with covariate-informed means.

Each ranker j evaluates entity i as ``Z_ij = alpha_i + x_i'beta + e_ij`` with
unit-variance noise and reports the order of ``Z_j`` (within its blocks).
Posterior sampling uses data augmentation with a global scale move on Z
(PX-DA); switching the move off gives the plain Gibbs sampler.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator

from ._gibbs import LatentLayout, update_latent
from ._validation import (check_covariates, check_rankings, check_seed,
                          resolve_threads, warn_unranked)
from .core import CovariateMatrix, RankingList, rank_of_scores
from .draws import PosteriorDraws
from .kernels import (DesignBlock, _draw_eta, as_generator, marginal_quadratic_S,
                      sample_theta, RngStream)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BarcConfig:
    sigma_alpha: float = 1.0
    sigma_beta: float = 100.0
    iterations: int = 5000  # total sweeps, burn-in included
    burn_in: int = 1000
    thin: int = 1
    px_enabled: bool = True
    seed: int = 0
    check_every: int = 100

    def __post_init__(self):
        if not (self.sigma_alpha > 0 and self.sigma_beta > 0):
            raise ConfigError("sigma_alpha and sigma_beta must be positive")
        if self.iterations < 1 or self.thin < 1 or self.burn_in < 0:
            raise ConfigError("iterations and thin must be positive, burn_in nonnegative")
        if self.burn_in >= self.iterations:
            raise ConfigError("no iterations left after burn-in")

    @property
    def n_stored(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))


# -- forward model -----------------------------------------------------------

def simulate_rankings(mu, sigma, m: int, blocks=None, rng=None) -> list[RankingList]:
    """Draw m ranking lists from ``Z_j ~ N(mu, sigma^2 I)``.

    ``sigma`` may be a scalar or one value per ranker. ``blocks`` restricts
    each list to within-block orders (a list of entity-index sequences).
    """
    rng = as_generator(rng)
    mu = np.asarray(mu, dtype=float)
    n = mu.size
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), (m,))
    Z = mu[:, None] + sig[None, :] * rng.standard_normal((n, m))
    if blocks is None:
        orders = np.argsort(-Z, axis=0, kind="stable")
        return [RankingList(str(j), (tuple(orders[:, j].tolist()),)) for j in range(m)]
    blocks = [np.asarray(b, dtype=np.intp) for b in blocks]
    out = []
    for j in range(m):
        bl = tuple(tuple(b[np.argsort(-Z[b, j], kind="stable")].tolist()) for b in blocks)
        out.append(RankingList(str(j), bl))
    return out


# -- Gibbs pieces ----------------------------------------------------------------

def gibbs_update_Z(Z, mean, rankings, rng, sd=None, layout: LatentLayout | None = None):
    """Redraw every latent entry from its truncated-normal full conditional.

    ``mean`` is a length-n score vector shared by all rankers or an n x m
    matrix. Returns the updated matrix (a copy).
    """
    Z = np.array(Z, dtype=float, copy=True)
    n, m = Z.shape
    layout = layout or LatentLayout.build(rankings, n)
    mean = np.asarray(mean, dtype=float)
    if mean.ndim == 1:
        mean = np.broadcast_to(mean[:, None], (n, m))
    sd = np.ones(m) if sd is None else np.broadcast_to(np.asarray(sd, float), (m,))
    update_latent(Z, mean, sd, layout, as_generator(rng))
    layout.check(Z)
    return Z


def _run_chain(rankings, cov: CovariateMatrix, cfg: BarcConfig, stream_id: int = 0,
               weight_step: Callable | None = None, theta_override: float | None = None,
               initial_weights=None):
    rng = RngStream(cfg.seed, stream_id).generator()
    n, m = cov.n, len(rankings)
    layout = LatentLayout.build(rankings, n)
    block = DesignBlock(cov.values, cfg.sigma_alpha, cfg.sigma_beta)
    Z = layout.initial_latent(rankings)
    mu = np.zeros(n)
    w = np.ones(m) if initial_weights is None else np.asarray(initial_weights, float).copy()
    sd = w ** -0.5

    L = cfg.n_stored
    out_mu = np.empty((L, n))
    out_beta = np.empty((L, cov.p))
    out_theta = np.empty(L) if cfg.px_enabled else None
    out_w = np.empty((L, m)) if weight_step is not None else None
    out_it = np.empty(L, dtype=np.int64)
    k = 0
    for it in range(cfg.iterations):
        update_latent(Z, np.broadcast_to(mu[:, None], (n, m)), sd, layout, rng)
        if it % cfg.check_every == 0 or it == cfg.iterations - 1:
            layout.check(Z)
        if cfg.px_enabled:
            if theta_override is not None:
                theta = float(theta_override)
            else:
                theta = sample_theta(marginal_quadratic_S(Z, w, block), n * m, rng)
        else:
            theta = 1.0
        eta = _draw_eta(Z @ w, w.sum(), theta, block, rng)
        if theta != 1.0:
            Z /= theta
        mu = block.v(eta)
        if weight_step is not None:
            w = weight_step(Z, mu, w, layout, rng)
            sd = w ** -0.5
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            out_mu[k] = mu - mu.mean()
            out_beta[k] = eta[n:]
            if out_theta is not None:
                out_theta[k] = theta
            if out_w is not None:
                out_w[k] = w
            out_it[k] = it
            k += 1
    return PosteriorDraws(
        centered_mu=out_mu, beta=out_beta, chain=np.full(L, stream_id, dtype=np.int64),
        iteration=out_it, theta=out_theta, weights=out_w,
        covariate_names=cov.column_names,
        ranker_ids=tuple(r.ranker_id for r in rankings),
    )


def run_chains(fn, n_chains: int, n_jobs: int = 1) -> PosteriorDraws:
    if n_jobs > 1 and n_chains > 1:
        parts = Parallel(n_jobs=min(n_jobs, n_chains))(delayed(fn)(c) for c in range(n_chains))
    else:
        parts = [fn(c) for c in range(n_chains)]
    return PosteriorDraws.concatenate(parts)


def run_barc(rankings, X, cfg: BarcConfig, n_chains: int = 1, n_jobs: int = 1,
             theta_override: float | None = None) -> PosteriorDraws:
    """Posterior draws of the centred scores under BARC.

    ``X`` is a :class:`CovariateMatrix` (possibly with zero columns, the
    covariate-free ablation) or an array used as-is.
    """
    rankings, n = check_rankings(rankings, None if X is None else _nrows(X))
    cov = X if isinstance(X, CovariateMatrix) else check_covariates(X, n, standardize=False)
    warn_unranked(rankings, n, cov.p)
    draws = run_chains(
        lambda c: _run_chain(rankings, cov, cfg, c, theta_override=theta_override),
        n_chains, n_jobs)
    draws.model = "barc" if cov.p else "bar"
    return draws


def _nrows(X) -> int:
    return X.n if isinstance(X, CovariateMatrix) else np.asarray(X).shape[0]


# -- estimator -------------------------------------------------------------------

class BARC(BaseEstimator):
    """Bayesian aggregation of rank data with entity covariates.

    Parameters
    ----------
    sigma_alpha, sigma_beta : float
        Prior sds of the entity intercepts and covariate coefficients.
    n_iter : int
        Gibbs sweeps per chain, burn-in included.
    burn_in, thin : int
        Discarded leading sweeps and storage stride.
    px : bool
        Use the scale-expanded sampler (recommended); False gives plain DA.
    n_chains : int
        Independent chains, pooled after burn-in.
    standardize : bool
        Standardise covariate columns before fitting.
    random_state : int or None
        Seed; chain c uses stream c of this seed.
    n_jobs : int or None
        Chains run in parallel up to this many workers
        (``RANKFUSE_THREADS`` when None).

    Attributes
    ----------
    draws_ : PosteriorDraws
    scores_ : ndarray of shape (n,)
        Posterior mean of the centred scores.
    ranking_ : FullRanking
        Entities ordered by ``scores_``.
    """

    _model = "barc"

    def __init__(self, sigma_alpha=1.0, sigma_beta=100.0, n_iter=5000, burn_in=1000,
                 thin=1, px=True, n_chains=1, standardize=True, random_state=None,
                 n_jobs=None):
        self.sigma_alpha = sigma_alpha
        self.sigma_beta = sigma_beta
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.px = px
        self.n_chains = n_chains
        self.standardize = standardize
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self) -> BarcConfig:
        return BarcConfig(
            sigma_alpha=self.sigma_alpha, sigma_beta=self.sigma_beta,
            iterations=self.n_iter, burn_in=self.burn_in, thin=self.thin,
            px_enabled=self.px, seed=check_seed(self.random_state),
        )

    def _prepare(self, rankings, X, n_entities):
        if X is not None:
            n_entities = _nrows(X)
        rankings, n = check_rankings(rankings, n_entities)
        cov = check_covariates(X, n, self.standardize)
        return rankings, cov

    def _sample(self, rankings, cov, cfg, n_jobs):
        return run_barc(rankings, cov, cfg, self.n_chains, n_jobs)

    def fit(self, rankings, X=None, n_entities=None, entity_ids=None):
        rankings, cov = self._prepare(rankings, X, n_entities)
        self.covariates_ = cov
        self.n_entities_ = cov.n
        draws = self._sample(rankings, cov, self._config(), resolve_threads(self.n_jobs))
        draws.model = self._model if cov.p else ("bar" if self._model == "barc" else self._model)
        if entity_ids is not None:
            draws.entity_ids = tuple(entity_ids)
        self.draws_ = draws
        self.scores_ = draws.centered_mu.mean(axis=0)
        self.ranking_ = rank_of_scores(self.scores_)
        return self

    def fit_predict(self, rankings, X=None, **kwargs) -> np.ndarray:
        """Fit and return the aggregated order (entity indices, best first)."""
        return np.asarray(self.fit(rankings, X, **kwargs).ranking_.order)
