"""Posterior summaries: aggregated rankings, rank intervals, covariate effects,
ranker reports and MCMC diagnostics."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import FullRanking, rank_of_scores
from .draws import PosteriorDraws


@dataclass
class AggregationResult:
    aggregated: FullRanking
    posterior_mean_scores: np.ndarray
    rank_intervals: np.ndarray  # n x 2, 1-based inclusive positions
    method: str
    chains: dict = field(default_factory=dict)

    def order_ids(self, entity_ids=None) -> list:
        ids = entity_ids or [str(i) for i in range(len(self.posterior_mean_scores))]
        return [ids[i] for i in self.aggregated.order]


def _score_matrix(draws) -> np.ndarray:
    mu = draws.centered_mu if isinstance(draws, PosteriorDraws) else np.asarray(draws, float)
    if mu.ndim == 1:
        mu = mu[None, :]
    if mu.shape[0] == 0:
        raise ValueError("no stored draws")
    return mu


def aggregate_rank(draws, level: float = 0.95) -> AggregationResult:
    """Rank entities by posterior mean score and attach rank intervals."""
    mu = _score_matrix(draws)
    mean = mu.mean(axis=0)
    chains = {}
    method = ""
    if isinstance(draws, PosteriorDraws):
        method = draws.model
        chains = {"n_chains": len(np.unique(draws.chain)), "n_draws": draws.n_draws}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        iv = rank_intervals(mu, level)
    return AggregationResult(rank_of_scores(mean), mean, iv, method, chains)


def draw_positions(mu: np.ndarray) -> np.ndarray:
    """1-based position of each entity in every draw's ranking (ties by index)."""
    mu = _score_matrix(mu)
    order = np.argsort(-mu, axis=1, kind="stable")
    pos = np.empty_like(order)
    rows = np.arange(mu.shape[0])[:, None]
    pos[rows, order] = np.arange(1, mu.shape[1] + 1)[None, :]
    return pos


def nearest_rank_quantile(sorted_vals: np.ndarray, q: float) -> np.ndarray:
    """Nearest-rank quantile along axis 0 of an already sorted array."""
    L = sorted_vals.shape[0]
    k = min(max(math.ceil(q * L), 1), L)
    return sorted_vals[k - 1]


def rank_intervals(draws, level: float = 0.95) -> np.ndarray:
    """Central ``level`` intervals of each entity's position across draws."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    pos = np.sort(draw_positions(draws), axis=0)
    if pos.shape[0] < math.ceil(1.0 / (1.0 - level)):
        warnings.warn(f"only {pos.shape[0]} draws for a {level:.0%} interval", stacklevel=2)
    a = (1.0 - level) / 2
    lo = nearest_rank_quantile(pos, a)
    hi = nearest_rank_quantile(pos, 1.0 - a)
    return np.column_stack([lo, hi])


# -- MCMC diagnostics ----------------------------------------------------------------

def acf(series, max_lag: int = 50) -> np.ndarray:
    """Sample autocorrelations for lags 0..max_lag (FFT; constant series gives 1, 0, ...)."""
    x = np.asarray(series, dtype=float)
    N = x.size
    max_lag = min(max_lag, N - 1)
    xc = x - x.mean()
    var = xc @ xc
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if var <= 0 or not np.isfinite(var):
        return out
    nfft = 1 << (2 * N - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    ac = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    return ac / ac[0]


def effective_sample_size(series) -> float:
    """ESS by the initial monotone sequence estimator.

    Lag pairs ``rho_2k + rho_2k+1`` are summed until the first non-positive
    pair and forced non-increasing; a constant series has ESS N.
    """
    x = np.asarray(series, dtype=float)
    N = x.size
    if N < 10:
        raise ValueError("need at least 10 draws")
    if np.ptp(x) == 0:
        return float(N)
    rho = acf(x, N - 1)
    n_pairs = rho.size // 2
    pairs = rho[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
    nonpos = np.flatnonzero(pairs <= 0)
    stop = nonpos[0] if nonpos.size else n_pairs
    pairs = np.minimum.accumulate(pairs[:stop])
    tau = -1.0 + 2.0 * pairs.sum()
    if tau <= 0:
        return float(N)
    return float(min(N / tau, N))


def mcse(series) -> float:
    x = np.asarray(series, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(effective_sample_size(x)))


def scalar_diagnostics(values, chain=None, max_lag: int = 50, trace_len: int = 200) -> dict:
    """ESS (summed over chains), per-chain ESS, mean ACF, MCSE and a trace extract."""
    values = np.asarray(values, dtype=float)
    chain = np.zeros(values.size, dtype=int) if chain is None else np.asarray(chain)
    ess_by_chain, acfs = {}, []
    for c in np.unique(chain):
        x = values[chain == c]
        ess_by_chain[int(c)] = effective_sample_size(x)
        acfs.append(acf(x, max_lag))
    lag = min(len(a) for a in acfs)
    ess = float(sum(ess_by_chain.values()))
    N = values.size
    constant = bool(np.ptp(values) == 0)
    return {
        "ess": ess,
        "ess_per_1000": 1000.0 * ess / N,
        "ess_by_chain": ess_by_chain,
        "acf": np.mean([a[:lag] for a in acfs], axis=0).tolist(),
        "mcse": 0.0 if constant else float(values.std(ddof=1) / math.sqrt(ess)),
        "mean": float(values.mean()),
        "constant": constant,
        "trace": values[chain == chain[0]][:trace_len].tolist(),
    }


def draw_scalars(draws: PosteriorDraws) -> dict[str, np.ndarray]:
    """Monitored scalars by name, as in the saved draws file."""
    return {name: np.asarray(col, dtype=float) for name, col in draws._columns()
            if name not in ("chain", "iteration") and not name.startswith("q[")}


def diagnostics_report(draws: PosteriorDraws, max_lag: int = 50, trace_len: int = 200) -> dict:
    scalars = {k: scalar_diagnostics(v, draws.chain, max_lag, trace_len)
               for k, v in draw_scalars(draws).items()}
    mu_ess = [v["ess_per_1000"] for k, v in scalars.items() if k.startswith("mu[")]
    return {
        "n_draws": draws.n_draws,
        "n_chains": len(np.unique(draws.chain)),
        "min_mu_ess_per_1000": float(min(mu_ess)) if mu_ess else None,
        "scalars": scalars,
    }


# -- covariates and rankers ------------------------------------------------------------

def covariate_effect_summary(draws: PosteriorDraws, level: float = 0.95) -> list[dict]:
    """Posterior mean and central interval of each (standardised) coefficient."""
    if draws.p == 0:
        return []
    a = (1.0 - level) / 2
    names = draws.covariate_names or tuple(f"x{k + 1}" for k in range(draws.p))
    lo, hi = np.quantile(draws.beta, [a, 1.0 - a], axis=0)
    mean = draws.beta.mean(axis=0)
    return [{"name": n, "mean": float(m), "lower": float(l), "upper": float(h)}
            for n, m, l, h in zip(names, mean, lo, hi)]


def coclustering_matrix(allocation) -> np.ndarray:
    """Fraction of draws in which each pair of rankers shares a cluster."""
    q = np.asarray(allocation)
    L, m = q.shape
    P = np.zeros((m, m))
    for row in q:
        P += row[:, None] == row[None, :]
    return P / L


def consensus_partition(allocation) -> np.ndarray:
    """Stored partition with the highest average Rand index against all draws."""
    q = np.asarray(allocation)
    P = coclustering_matrix(q)
    iu = np.triu_indices(q.shape[1], 1)
    if iu[0].size == 0:
        return q[0].copy()
    uniq = np.unique(q, axis=0)
    best, best_score = uniq[0], -np.inf
    for c in uniq:
        same = c[iu[0]] == c[iu[1]]
        score = np.where(same, P[iu], 1.0 - P[iu]).mean()
        if score > best_score:
            best, best_score = c, score
    return best.copy()


@dataclass
class RankerReport:
    ranker_ids: tuple
    mean_weight: np.ndarray | None = None
    weight_probs: dict | None = None
    coclustering: np.ndarray | None = None
    consensus: np.ndarray | None = None
    mean_ranker_scores: np.ndarray | None = None


def ranker_report(draws: PosteriorDraws) -> RankerReport:
    m = None
    for arr in (draws.weights, draws.allocation):
        if arr is not None:
            m = arr.shape[1]
    ids = draws.ranker_ids or tuple(str(j) for j in range(m or 0))
    rep = RankerReport(ranker_ids=ids)
    if draws.weights is not None:
        w = draws.weights
        rep.mean_weight = w.mean(axis=0)
        levels = np.unique(w)
        rep.weight_probs = {float(v): (w == v).mean(axis=0) for v in levels}
    if draws.allocation is not None:
        rep.coclustering = coclustering_matrix(draws.allocation)
        rep.consensus = consensus_partition(draws.allocation)
        rep.mean_ranker_scores = draws.ranker_mu_mean
    return rep


# -- export --------------------------------------------------------------------------

def build_report(draws: PosteriorDraws, level: float = 0.95, diagnostics: dict | None = None,
                 result: AggregationResult | None = None) -> dict:
    """JSON-ready report of a posterior fit."""
    res = result or aggregate_rank(draws, level)
    ids = list(draws.entity_ids or [str(i) for i in range(draws.n)])
    rep = ranker_report(draws)
    weights = None
    if rep.mean_weight is not None:
        weights = {r: {"mean": float(rep.mean_weight[j]),
                       "probs": {str(k): float(v[j]) for k, v in rep.weight_probs.items()}}
                   for j, r in enumerate(rep.ranker_ids)}
    cocl = None
    if rep.coclustering is not None:
        cocl = {"ranker_ids": list(rep.ranker_ids), "matrix": rep.coclustering.tolist(),
                "consensus": rep.consensus.tolist()}
    return {
        "model": draws.model,
        "aggregated_order": res.order_ids(ids),
        "mean_scores": {e: float(s) for e, s in zip(ids, res.posterior_mean_scores)},
        "rank_intervals": {e: [int(a), int(b)] for e, (a, b) in zip(ids, res.rank_intervals)},
        "interval_level": level,
        "beta_summary": covariate_effect_summary(draws, level),
        "weights_summary": weights,
        "coclustering": cocl,
        "diagnostics": diagnostics if diagnostics is not None else {},
    }


def write_table_csv(path, entity_ids, methods: dict) -> Path:
    """Side-by-side table: entity, then ``<method>_score`` and ``<method>_rank``.

    ``methods`` maps a method name to its score vector (higher is better);
    rows follow the order of the first method.
    """
    path = Path(path)
    names = list(methods)
    ranks = {k: np.asarray(rank_of_scores(np.asarray(v, float)).positions) + 1
             for k, v in methods.items()}
    first = rank_of_scores(np.asarray(methods[names[0]], float)).order
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity"] + [c for k in names for c in (f"{k}_score", f"{k}_rank")])
        for i in first:
            row = [entity_ids[i]]
            for k in names:
                row += [f"{float(methods[k][i]):.6g}", int(ranks[k][i])]
            w.writerow(row)
    return path
