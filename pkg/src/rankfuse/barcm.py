"""BARCM: a Dirichlet-process mixture over ranker-specific score vectors.

Rankers in the same cluster share ``(alpha, beta)``. Allocations are
resampled with the cluster parameters integrated out (the conjugate
collapsed sampler), then cluster parameters are drawn with a single global
scale move on Z.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.special import logsumexp

from ._gibbs import LatentLayout, update_latent
from ._validation import check_covariates, check_rankings, warn_unranked
from .barc import BARC, BarcConfig, ConfigError, _nrows, run_chains
from .core import CovariateMatrix
from .draws import PosteriorDraws
from .kernels import (DesignBlock, RngStream, _draw_eta, as_generator,
                      marginal_quadratic_S, sample_theta)


@dataclass(frozen=True)
class DpConfig(BarcConfig):
    gamma: float = 1.0
    keep_ranker_draws: bool = True

    def __post_init__(self):
        super().__post_init__()
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")


def crp_expected_clusters(m: int, gamma: float) -> float:
    """Prior expected number of occupied clusters among m rankers."""
    if m < 1 or not gamma > 0:
        raise ValueError("need m >= 1 and gamma > 0")
    j = np.arange(1, m + 1)
    return float(np.sum(gamma / (j + gamma - 1.0)))


class _ClusterMarginal:
    """Log marginal likelihood of cluster latent columns, (alpha, beta) integrated.

    For a cluster of c columns with eigen-coordinates summing to s the value
    is ``-1/2 sum log(1 + c d) - 1/2 (sum ||Z_j||^2 - sum d/(1+cd) s^2)`` up
    to a term that only depends on the total number of columns.
    """

    def __init__(self, block: DesignBlock, m: int):
        d, U = block.kernel_eigen()
        c = np.arange(m + 2, dtype=float)[:, None]
        self.U = U
        self.G = d[None, :] / (1.0 + c * d[None, :])
        self.logdet = np.log1p(c * d[None, :]).sum(axis=1)


def gibbs_update_allocation(Z, q, block: DesignBlock, gamma: float, rng,
                            likelihood: bool = True, _marg: _ClusterMarginal | None = None):
    """One sweep of collapsed allocation updates, rankers in index order.

    ``q`` holds arbitrary integer labels; the result uses labels
    ``0..K-1`` in order of first appearance. With ``likelihood=False`` the
    data term is dropped and the sweep targets the CRP prior.
    """
    rng = as_generator(rng)
    Z = np.asarray(Z, dtype=float)
    n, m = Z.shape
    _, q = np.unique(np.asarray(q), return_inverse=True)
    q = q.astype(np.intp)
    marg = _marg or _ClusterMarginal(block, m)
    Y = marg.U.T @ Z
    zz = np.einsum("ij,ij->j", Z, Z)
    sizes = np.bincount(q).astype(np.intp)
    sums = np.zeros((sizes.size, n))
    np.add.at(sums, q, Y.T)
    log_gamma = np.log(gamma)

    for j in range(m):
        k0 = q[j]
        sizes[k0] -= 1
        sums[k0] -= Y[:, j]
        if sizes[k0] == 0:
            keep = np.arange(sizes.size) != k0
            sizes, sums = sizes[keep], sums[keep]
            q[q > k0] -= 1
        K = sizes.size
        logp = np.empty(K + 1)
        logp[:K] = np.log(sizes)
        logp[K] = log_gamma
        if likelihood:
            y = Y[:, j]
            G0, G1 = marg.G[sizes], marg.G[sizes + 1]
            quad_new = np.einsum("kn,kn->k", G1, (sums + y) ** 2)
            quad_old = np.einsum("kn,kn->k", G0, sums ** 2)
            logp[:K] += -0.5 * (marg.logdet[sizes + 1] - marg.logdet[sizes]) \
                - 0.5 * (zz[j] - quad_new + quad_old)
            logp[K] += -0.5 * marg.logdet[1] - 0.5 * (zz[j] - marg.G[1] @ (y * y))
        prob = np.exp(logp - logsumexp(logp))
        k = int(min(np.searchsorted(np.cumsum(prob), rng.random(), side="right"), K))
        if k == K:
            sizes = np.append(sizes, 1)
            sums = np.vstack([sums, Y[:, j]])
        else:
            sizes[k] += 1
            sums[k] += Y[:, j]
        q[j] = k
    return _canonical(q)


def _canonical(q: np.ndarray) -> np.ndarray:
    """Relabel so clusters are numbered by first appearance."""
    _, first, inv = np.unique(q, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.intp)


def _run_chain(rankings, cov: CovariateMatrix, cfg: DpConfig, stream_id: int = 0):
    rng = RngStream(cfg.seed, stream_id).generator()
    n, m, p = cov.n, len(rankings), cov.p
    layout = LatentLayout.build(rankings, n)
    block = DesignBlock(cov.values, cfg.sigma_alpha, cfg.sigma_beta)
    marg = _ClusterMarginal(block, m)
    Z = layout.initial_latent(rankings)
    q = np.arange(m, dtype=np.intp)  # start from singletons and let clusters merge
    M = np.zeros((n, m))
    sd = np.ones(m)

    L = cfg.n_stored
    out_mu = np.empty((L, n))
    out_beta = np.empty((L, p))
    out_theta = np.empty(L) if cfg.px_enabled else None
    out_q = np.empty((L, m), dtype=np.int64)
    out_rmu = np.empty((L, m, n)) if cfg.keep_ranker_draws else None
    rmu_sum = np.zeros((m, n))
    out_it = np.empty(L, dtype=np.int64)
    k = 0
    for it in range(cfg.iterations):
        update_latent(Z, M, sd, layout, rng)
        if it % cfg.check_every == 0 or it == cfg.iterations - 1:
            layout.check(Z)
        q = gibbs_update_allocation(Z, q, block, cfg.gamma, rng, _marg=marg)
        K = int(q.max()) + 1
        members = [np.flatnonzero(q == c) for c in range(K)]
        if cfg.px_enabled:
            S = sum(marginal_quadratic_S(Z[:, a], None, block) for a in members)
            theta = sample_theta(S, n * m, rng)
        else:
            theta = 1.0
        etas = np.empty((K, n + p))
        for c, a in enumerate(members):
            etas[c] = _draw_eta(Z[:, a].sum(axis=1), a.size, theta, block, rng)
        if theta != 1.0:
            Z /= theta
        mus = np.stack([block.v(e) for e in etas])  # K x n
        M = mus[q].T
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            centred = mus - mus.mean(axis=1, keepdims=True)
            per_ranker = centred[q]
            out_mu[k] = per_ranker.mean(axis=0)
            out_beta[k] = etas[q, n:].mean(axis=0)
            if out_theta is not None:
                out_theta[k] = theta
            out_q[k] = q
            if out_rmu is not None:
                out_rmu[k] = per_ranker
            rmu_sum += per_ranker
            out_it[k] = it
            k += 1
    return PosteriorDraws(
        centered_mu=out_mu, beta=out_beta, chain=np.full(L, stream_id, dtype=np.int64),
        iteration=out_it, theta=out_theta, allocation=out_q, ranker_mu=out_rmu,
        ranker_mu_mean=rmu_sum / L, covariate_names=cov.column_names,
        ranker_ids=tuple(r.ranker_id for r in rankings), model="barcm",
    )


def run_barcm(rankings, X, cfg: DpConfig, n_chains: int = 1, n_jobs: int = 1) -> PosteriorDraws:
    """Posterior draws under BARCM.

    ``draws.centered_mu`` is the centred across-ranker average score,
    ``draws.allocation`` the cluster labels, ``draws.ranker_mu`` the
    per-ranker centred scores (when kept) and ``draws.ranker_mu_mean`` their
    posterior mean.
    """
    rankings, n = check_rankings(rankings, None if X is None else _nrows(X))
    cov = X if isinstance(X, CovariateMatrix) else check_covariates(X, n, standardize=False)
    warn_unranked(rankings, n, cov.p)
    draws = run_chains(partial(_run_chain, rankings, cov, cfg), n_chains, n_jobs)
    draws.model = "barcm"
    return draws


def cluster_counts(allocation: np.ndarray) -> np.ndarray:
    """Number of occupied clusters in each stored draw."""
    a = np.sort(np.asarray(allocation), axis=1)
    return 1 + (np.diff(a, axis=1) != 0).sum(axis=1)


class BARCM(BARC):
    """Dirichlet-process mixture of BARC models over rankers.

    Adds ``ranker_scores_`` (m x n posterior mean centred scores),
    ``n_clusters_`` (posterior mean number of clusters), ``coclustering_``
    and ``partition_`` (consensus partition) after fitting.
    """

    _model = "barcm"

    def __init__(self, sigma_alpha=1.0, sigma_beta=100.0, n_iter=5000, burn_in=1000,
                 thin=1, px=True, n_chains=1, standardize=True, random_state=None,
                 n_jobs=None, gamma=1.0, keep_ranker_draws=True):
        super().__init__(sigma_alpha, sigma_beta, n_iter, burn_in, thin, px, n_chains,
                         standardize, random_state, n_jobs)
        self.gamma = gamma
        self.keep_ranker_draws = keep_ranker_draws

    def _config(self) -> DpConfig:
        base = super()._config()
        return DpConfig(**{**base.__dict__, "gamma": self.gamma,
                           "keep_ranker_draws": self.keep_ranker_draws})

    def _sample(self, rankings, cov, cfg, n_jobs):
        return run_barcm(rankings, cov, cfg, self.n_chains, n_jobs)

    def fit(self, rankings, X=None, n_entities=None, entity_ids=None):
        from .summaries import coclustering_matrix, consensus_partition

        super().fit(rankings, X, n_entities, entity_ids)
        d = self.draws_
        self.ranker_scores_ = d.ranker_mu_mean
        self.n_clusters_ = float(cluster_counts(d.allocation).mean())
        self.coclustering_ = coclustering_matrix(d.allocation)
        self.partition_ = consensus_partition(d.allocation)
        return self
