"""Non-Bayesian aggregators: Borda count, Markov-chain methods and Plackett-Luce.

Every method works on per-ranker blocks: comparisons are only made between
entities that share a block in the same list.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.base import BaseEstimator

from ._validation import check_rankings
from .core import FullRanking, RankingError, rank_of_scores


class CoverageError(RankingError):
    """Some entity is ranked by no list."""


class ConvergenceError(RuntimeError):
    pass


class PlDegeneracyError(ValueError):
    """The comparison graph is not strongly connected; the MLE does not exist."""

    def __init__(self, msg, entities=()):
        super().__init__(msg)
        self.entities = tuple(entities)


MC_VARIANTS = ("MC1", "MC2", "MC3")


def _block_positions(rankings):
    """Yield (list index, block as int array) for every block."""
    for j, r in enumerate(rankings):
        for b in r.blocks:
            yield j, np.asarray(b, dtype=np.intp)


# -- Borda -----------------------------------------------------------------------

@dataclass
class BordaResult:
    ranking: FullRanking
    mean_position: np.ndarray  # nan for entities no list ranks
    unranked: np.ndarray  # boolean flags


def borda(rankings, n: int | None = None) -> BordaResult:
    """Sort entities by mean observed (1-based, within-block) position.

    The mean for an entity runs over the lists that rank it. Entities no
    list ranks go last; ties go to the lower index.
    """
    rankings, n = check_rankings(rankings, n)
    total = np.zeros(n)
    count = np.zeros(n)
    for _, b in _block_positions(rankings):
        total[b] += np.arange(1, b.size + 1)
        count[b] += 1
    unranked = count == 0
    mean = np.full(n, np.nan)
    mean[~unranked] = total[~unranked] / count[~unranked]
    key = np.where(unranked, np.inf, mean)
    order = np.lexsort((np.arange(n), key))
    return BordaResult(FullRanking.from_order(order), mean, unranked)


# -- Markov chains ---------------------------------------------------------------

def build_mc_chain(rankings, variant: str = "MC2", smoothing: float = 0.05,
                   n: int | None = None) -> np.ndarray:
    """Row-stochastic transition matrix of MC1, MC2 or MC3.

    From entity i, with the lists (blocks) that contain i:

    * MC1: uniform over the multiset union of entities placed at or above i.
    * MC2: a uniform list, then a uniform entity placed at or above i in it.
    * MC3: a uniform list, then a uniform entity of its block; move there if
      it is placed above i, otherwise stay.

    The result is ``(1 - smoothing) P + smoothing / n``.
    """
    variant = variant.upper()
    if variant not in MC_VARIANTS:
        raise ValueError(f"variant must be one of {MC_VARIANTS}")
    if not 0 <= smoothing < 1:
        raise ValueError("smoothing must lie in [0, 1)")
    rankings, n = check_rankings(rankings, n)
    acc = np.zeros((n, n))  # MC1: counts; MC2/MC3: summed per-list probabilities
    lists = np.zeros(n)
    for _, b in _block_positions(rankings):
        lists[b] += 1
        size = b.size
        for t, i in enumerate(b):
            above = b[: t + 1]
            if variant == "MC1":
                acc[i, above] += 1.0
            elif variant == "MC2":
                acc[i, above] += 1.0 / (t + 1)
            else:
                acc[i, b[:t]] += 1.0 / size
                acc[i, i] += (size - t) / size
    if np.any(lists == 0):
        missing = np.flatnonzero(lists == 0).tolist()
        raise CoverageError(f"entities {missing} appear in no list")
    denom = acc.sum(axis=1) if variant == "MC1" else lists
    P = acc / denom[:, None]
    return (1.0 - smoothing) * P + smoothing / n


def stationary_distribution(P, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Power iteration from the uniform vector until the L1 step is below tol."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-10):
        raise ValueError("P is not row-stochastic")
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


# -- Plackett-Luce -----------------------------------------------------------------

def _comparison_graph_check(blocks, n):
    rows, cols = [], []
    for b in blocks:
        for t in range(b.size - 1):
            rows.extend([b[t]] * (b.size - t - 1))
            cols.extend(b[t + 1:].tolist())
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    k, labels = connected_components(g, directed=True, connection="strong")
    if k == 1:
        return
    # a component nobody outside beats: no edge enters it from another component
    entered = np.zeros(k, dtype=bool)
    gc = g.tocoo()
    cross = labels[gc.row] != labels[gc.col]
    entered[labels[gc.col[cross]]] = True
    comp = int(np.flatnonzero(~entered)[0])
    members = np.flatnonzero(labels == comp).tolist()
    raise PlDegeneracyError(
        f"comparison graph is not strongly connected; entities {members} are never "
        "beaten by anyone outside the set", members)


def pl_log_likelihood(blocks, gamma) -> float:
    g = np.asarray(gamma, dtype=float)
    ll = 0.0
    for b in blocks:
        w = g[b]
        tail = np.cumsum(w[::-1])[::-1]
        ll += float(np.sum(np.log(w[:-1]) - np.log(tail[:-1])))
    return ll


def fit_plackett_luce(rankings, n: int | None = None, max_iter: int = 10_000,
                      tol: float = 1e-10, trace: list | None = None) -> np.ndarray:
    """Maximum-likelihood Plackett-Luce worths by the MM algorithm.

    Each block is a complete order of its entities. Iterates until the
    largest relative change is below ``tol``; returns worths summing to one.
    When ``trace`` is a list, the log-likelihood of every iterate is appended.
    """
    rankings, n = check_rankings(rankings, n)
    blocks = [b for _, b in _block_positions(rankings) if b.size > 1]
    _comparison_graph_check(blocks, n)
    wins = np.zeros(n)
    for b in blocks:
        wins[b[:-1]] += 1
    gamma = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        if trace is not None:
            trace.append(pl_log_likelihood(blocks, gamma))
        denom = np.zeros(n)
        for b in blocks:
            tail = np.cumsum(gamma[b][::-1])[::-1][:-1]  # stage choice-set totals
            # entity at position t is in the choice sets of stages 0..min(t, len-2)
            contrib = np.cumsum(1.0 / tail)
            idx = np.minimum(np.arange(b.size), b.size - 2)
            denom[b] += contrib[idx]
        new = wins / denom
        new /= new.sum()
        change = np.max(np.abs(new - gamma) / gamma)
        gamma = new
        if change < tol:
            break
    else:
        raise ConvergenceError(f"MM did not converge in {max_iter} iterations")
    if trace is not None:
        trace.append(pl_log_likelihood(blocks, gamma))
    return gamma


def pl_probability(order, gamma) -> float:
    """Probability of a complete order under Plackett-Luce worths ``gamma``."""
    if isinstance(order, FullRanking):
        order = order.order
    g = np.asarray(gamma, dtype=float)
    if np.any(g <= 0) or abs(g.sum() - 1.0) > 1e-10:
        raise ValueError("gamma must be positive and sum to one")
    w = g[np.asarray(order, dtype=np.intp)]
    tail = np.cumsum(w[::-1])[::-1]
    return float(np.prod(w / tail))


# -- estimators ------------------------------------------------------------------

class BordaCount(BaseEstimator):
    """Borda count; ``scores_`` are negated mean positions (unranked: -inf)."""

    def fit(self, rankings, n_entities=None):
        res = borda(rankings, n_entities)
        self.mean_position_ = res.mean_position
        self.unranked_ = res.unranked
        self.scores_ = np.where(res.unranked, -np.inf, -np.nan_to_num(res.mean_position))
        self.ranking_ = res.ranking
        return self


class MarkovChainRank(BaseEstimator):
    """Stationary-distribution aggregation with MC1, MC2 or MC3."""

    def __init__(self, variant="MC2", smoothing=0.05, tol=1e-12):
        self.variant = variant
        self.smoothing = smoothing
        self.tol = tol

    def fit(self, rankings, n_entities=None):
        self.transition_ = build_mc_chain(rankings, self.variant, self.smoothing, n_entities)
        self.scores_ = stationary_distribution(self.transition_, self.tol)
        self.ranking_ = rank_of_scores(self.scores_)
        return self


class PlackettLuce(BaseEstimator):
    """Plackett-Luce maximum likelihood; ``scores_`` are the fitted worths."""

    def __init__(self, max_iter=10_000, tol=1e-10):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, rankings, n_entities=None):
        self.scores_ = fit_plackett_luce(rankings, n_entities, self.max_iter, self.tol)
        self.ranking_ = rank_of_scores(self.scores_)
        return self
