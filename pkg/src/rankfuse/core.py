"""Ranking lists, covariates, and the distances used to compare rankings.

Positions are 0-based inside the library. Everything that leaves the
library (CSV files, JSON reports) uses 1-based positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np


class RankingError(ValueError):
    """Invalid ranking data (duplicate entity, bad index, observed tie)."""


class TieError(RankingError):
    def __init__(self, i: int, j: int):
        super().__init__(f"tied scores for entities {i} and {j}")
        self.pair = (i, j)


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class EntitySet:
    ids: tuple[str, ...]

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        if not ids:
            raise RankingError("entity set is empty")
        if len(set(ids)) != len(ids):
            raise RankingError("entity ids are not unique")
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return len(self.ids)

    def index(self, entity_id: str) -> int:
        try:
            return self._lookup[entity_id]
        except KeyError:
            raise RankingError(f"unknown entity id {entity_id!r}") from None

    @property
    def _lookup(self) -> dict[str, int]:
        lookup = self.__dict__.get("_lookup_cache")
        if lookup is None:
            lookup = {e: k for k, e in enumerate(self.ids)}
            object.__setattr__(self, "_lookup_cache", lookup)
        return lookup


@dataclass(frozen=True)
class RankingList:
    """One ranker's preferences as ordered blocks of entity indices.

    Each block is a strict order, best first. Entities in different blocks
    are not compared. A single block over a subset of entities represents a
    top list whose missing entities are missing at random.
    """

    ranker_id: str
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        if not blocks:
            raise RankingError(f"ranker {self.ranker_id!r} has no blocks")
        seen: set[int] = set()
        for b in blocks:
            if len(b) == 0:
                raise RankingError(f"ranker {self.ranker_id!r} has an empty block")
            for i in b:
                if i < 0:
                    raise RankingError(f"negative entity index {i}")
                if i in seen:
                    raise RankingError(
                        f"entity {i} appears twice in ranker {self.ranker_id!r}"
                    )
                seen.add(i)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_order(cls, order: Sequence[int], ranker_id: str = "") -> "RankingList":
        return cls(ranker_id, (tuple(order),))

    @property
    def entities(self) -> list[int]:
        return [i for b in self.blocks for i in b]

    def is_full(self, n: int) -> bool:
        return len(self.blocks) == 1 and len(self.blocks[0]) == n

    def check_bounds(self, n: int) -> None:
        for i in self.entities:
            if i >= n:
                raise RankingError(
                    f"entity index {i} out of range for n={n} (ranker {self.ranker_id!r})"
                )

    def pairs(self):
        """Yield every implied (better, worse) pair."""
        for b in self.blocks:
            for a, c in combinations(range(len(b)), 2):
                yield b[a], b[c]


@dataclass(frozen=True)
class FullRanking:
    """A permutation: ``order[k]`` is the entity at 0-based position ``k``."""

    order: np.ndarray
    positions: np.ndarray = field(repr=False)

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "FullRanking":
        order = np.asarray(order, dtype=np.intp)
        n = order.size
        if sorted(order.tolist()) != list(range(n)):
            raise RankingError("order is not a permutation of 0..n-1")
        positions = np.empty(n, dtype=np.intp)
        positions[order] = np.arange(n)
        order.setflags(write=False)
        positions.setflags(write=False)
        return cls(order, positions)

    @property
    def n(self) -> int:
        return int(self.order.size)

    def to_ranking_list(self, ranker_id: str = "") -> RankingList:
        return RankingList.from_order(self.order.tolist(), ranker_id)


@dataclass(frozen=True)
class CovariateMatrix:
    values: np.ndarray
    column_names: tuple[str, ...]
    standardized: bool = False
    column_means: np.ndarray | None = None
    column_sds: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise DimensionError("covariates must be a 2-d array")
        if not np.all(np.isfinite(values)):
            raise ValueError("covariates contain non-finite values")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != values.shape[1]:
            raise DimensionError(
                f"{len(names)} column names for {values.shape[1]} columns"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, column_names=None, standardize: bool = True):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if column_names is None:
            column_names = [f"x{k + 1}" for k in range(values.shape[1])]
        raw = cls(values, tuple(column_names))
        return raw.standardize() if standardize else raw

    def standardize(self) -> "CovariateMatrix":
        """Center each column and scale it to unit sample sd."""
        if self.standardized or self.p == 0:
            return self
        means = self.values.mean(axis=0)
        sds = self.values.std(axis=0, ddof=1) if self.n > 1 else np.zeros(self.p)
        bad = [self.column_names[k] for k in np.flatnonzero(~(sds > 0))]
        if bad:
            raise ValueError(f"covariate columns with zero variance: {bad}")
        return CovariateMatrix(
            (self.values - means) / sds, self.column_names, True, means, sds
        )


def rank_of_scores(scores, tie_rule: str = "ties-by-index") -> FullRanking:
    """Order entities by decreasing score.

    ``tie_rule`` is ``"ties-by-index"`` (equal scores go by ascending index)
    or ``"ties-forbidden"`` (raise :class:`TieError`).
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1:
        raise DimensionError("scores must be 1-d")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    # stable sort on -score keeps ascending index among equals
    order = np.argsort(-scores, kind="stable")
    if tie_rule == "ties-forbidden":
        s = scores[order]
        dup = np.flatnonzero(s[1:] == s[:-1])
        if dup.size:
            k = int(dup[0])
            raise TieError(int(order[k]), int(order[k + 1]))
    elif tie_rule != "ties-by-index":
        raise ValueError(f"unknown tie rule {tie_rule!r}")
    return FullRanking.from_order(order)


def is_consistent(partial: RankingList, full: FullRanking) -> bool:
    pos = full.positions
    for b in partial.blocks:
        if any(i >= full.n for i in b):
            raise RankingError("partial list references entity outside the ranking")
        p = pos[list(b)]
        if np.any(p[1:] <= p[:-1]):
            return False
    return True


def _check_same_n(a: FullRanking, b: FullRanking) -> int:
    if a.n != b.n:
        raise DimensionError(f"rankings have different lengths {a.n} and {b.n}")
    return a.n


def kendall_distance(a: FullRanking, b: FullRanking, normalized: bool = True) -> float:
    """Number of discordant pairs, optionally divided by n(n-1)/2."""
    n = _check_same_n(a, b)
    if n < 2:
        raise DimensionError("kendall distance needs n >= 2")
    # positions in b, listed in a's order; discordant pairs are inversions
    seq = b.positions[a.order]
    disc = _count_inversions(seq)
    if normalized:
        return disc / (n * (n - 1) / 2)
    return float(disc)


def _count_inversions(seq: np.ndarray) -> int:
    n = seq.size
    if n < 2:
        return 0
    tree = np.zeros(n + 1, dtype=np.int64)
    inv = 0
    for k, v in enumerate(seq.tolist()):
        # number of earlier values greater than v
        i = v + 1
        le = 0
        while i > 0:
            le += tree[i]
            i -= i & -i
        inv += k - le
        i = v + 1
        while i <= n:
            tree[i] += 1
            i += i & -i
    return int(inv)


def footrule_distance(a: FullRanking, b: FullRanking, normalized: bool = True) -> float:
    n = _check_same_n(a, b)
    d = float(np.abs(a.positions - b.positions).sum())
    if normalized:
        if n < 2:
            raise DimensionError("normalized footrule needs n >= 2")
        return d / (n * n // 2)
    return d


def rand_index(part_a, part_b) -> float:
    a = np.asarray(part_a)
    b = np.asarray(part_b)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError("partitions must be 1-d labelings of equal length")
    m = a.size
    if m < 2:
        raise DimensionError("rand index needs at least two items")
    iu = np.triu_indices(m, 1)
    same_a = (a[:, None] == a[None, :])[iu]
    same_b = (b[:, None] == b[None, :])[iu]
    return float(np.mean(same_a == same_b))
