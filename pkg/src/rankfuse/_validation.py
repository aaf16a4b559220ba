from __future__ import annotations

import os
import warnings

import numpy as np
from sklearn.utils import check_array

from .core import CovariateMatrix, RankingError, RankingList


def check_rankings(rankings, n: int | None = None) -> tuple[list[RankingList], int]:
    """Coerce rankings to ``RankingList`` objects and infer n when absent.

    Accepts ``RankingList`` instances, flat orders (``[2, 0, 1]``) or lists of
    blocks (``[[2, 0], [1, 3]]``).
    """
    if rankings is None or len(rankings) == 0:
        raise RankingError("at least one ranking list is required")
    out = []
    for j, r in enumerate(rankings):
        if isinstance(r, RankingList):
            out.append(r)
            continue
        r = list(r)
        if r and all(np.ndim(x) == 0 for x in r):
            out.append(RankingList(str(j), (tuple(r),)))
        else:
            out.append(RankingList(str(j), tuple(tuple(b) for b in r)))
    top = max(max(r.entities) for r in out) + 1
    if n is None:
        n = top
    for r in out:
        r.check_bounds(n)
    return out, n


def check_covariates(X, n: int | None, standardize: bool = True) -> CovariateMatrix:
    if X is None:
        if n is None:
            raise ValueError("need covariates or an entity count")
        return CovariateMatrix(np.zeros((n, 0)), ())
    if isinstance(X, CovariateMatrix):
        cov = X
    else:
        names = list(getattr(X, "columns", [])) or None
        arr = check_array(X, ensure_2d=True, ensure_min_features=0, dtype=float)
        cov = CovariateMatrix.from_array(arr, names, standardize=False)
    if n is not None and cov.n != n:
        raise ValueError(f"covariates have {cov.n} rows, rankings imply {n} entities")
    return cov.standardize() if standardize else cov


def warn_unranked(rankings, n: int, p: int) -> None:
    ranked = set()
    for r in rankings:
        ranked.update(r.entities)
    missing = sorted(set(range(n)) - ranked)
    if missing and p == 0:
        warnings.warn(
            f"entities {missing} are ranked by no list and have no covariates; "
            "their scores are driven by the prior",
            stacklevel=3,
        )


def check_seed(random_state) -> int:
    if random_state is None:
        return int(np.random.SeedSequence().entropy % (2 ** 63))
    if isinstance(random_state, (int, np.integer)):
        return int(random_state)
    raise TypeError("random_state must be an int seed or None")


def resolve_threads(n_jobs) -> int:
    if n_jobs is None:
        env = os.environ.get("RANKFUSE_THREADS")
        return int(env) if env else 1
    return int(n_jobs)
