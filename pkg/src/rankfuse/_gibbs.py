"""Latent-score bookkeeping shared by the three samplers.

The truncated-normal update of a latent entry only depends on its two
neighbours in the same block of the same ranker. Entries at even
within-block positions are therefore conditionally independent given the
odd ones (and vice versa), so a sweep updates all even positions of all
rankers at once, then all odd positions, then the entries a ranker never
ranked. That is a valid systematic-scan Gibbs sweep and vectorises well.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import truncnorm_draws


class ConsistencyError(RuntimeError):
    """A latent column no longer respects its ranker's observed order."""


@dataclass
class LatentLayout:
    n: int
    m: int
    # per parity group: (rows, cols, above, below); -1 marks a missing neighbour
    groups: list = field(default_factory=list)
    free_rows: np.ndarray = None
    free_cols: np.ndarray = None
    # adjacent pairs (better, worse, ranker) for consistency checks
    pair_hi: np.ndarray = None
    pair_lo: np.ndarray = None
    pair_col: np.ndarray = None

    @classmethod
    def build(cls, rankings, n: int) -> "LatentLayout":
        m = len(rankings)
        recs = {0: [], 1: []}
        hi, lo, pc = [], [], []
        ranked = np.zeros((n, m), dtype=bool)
        for j, r in enumerate(rankings):
            for b in r.blocks:
                L = len(b)
                for k, i in enumerate(b):
                    above = b[k - 1] if k > 0 else -1
                    below = b[k + 1] if k < L - 1 else -1
                    recs[k % 2].append((i, j, above, below))
                    ranked[i, j] = True
                    if k < L - 1:
                        hi.append(i)
                        lo.append(b[k + 1])
                        pc.append(j)
        groups = []
        for g in (0, 1):
            if recs[g]:
                a = np.asarray(recs[g], dtype=np.intp)
                groups.append((a[:, 0], a[:, 1], a[:, 2], a[:, 3]))
        fr, fc = np.nonzero(~ranked)
        return cls(n, m, groups, fr, fc,
                   np.asarray(hi, dtype=np.intp), np.asarray(lo, dtype=np.intp),
                   np.asarray(pc, dtype=np.intp))

    def initial_latent(self, rankings) -> np.ndarray:
        """Equally spaced values in [-2, 2], descending along each block."""
        Z = np.zeros((self.n, self.m))
        for j, r in enumerate(rankings):
            for b in r.blocks:
                if len(b) > 1:
                    Z[list(b), j] = np.linspace(2.0, -2.0, len(b))
        return Z

    def is_consistent(self, Z: np.ndarray) -> bool:
        if self.pair_hi.size == 0:
            return True
        return bool(np.all(Z[self.pair_hi, self.pair_col] > Z[self.pair_lo, self.pair_col]))

    def check(self, Z: np.ndarray) -> None:
        if not self.is_consistent(Z):
            bad = np.flatnonzero(
                Z[self.pair_hi, self.pair_col] <= Z[self.pair_lo, self.pair_col])[0]
            raise ConsistencyError(
                f"ranker {self.pair_col[bad]}: entity {self.pair_hi[bad]} no longer "
                f"above entity {self.pair_lo[bad]}")


def update_latent(Z: np.ndarray, mean: np.ndarray, sd: np.ndarray,
                  layout: LatentLayout, rng: np.random.Generator) -> np.ndarray:
    """One Gibbs sweep over every latent entry, in place.

    ``mean`` is n x m (broadcast views are fine), ``sd`` has one entry per
    ranker.
    """
    for rows, cols, above, below in layout.groups:
        upper = np.where(above >= 0, Z[np.maximum(above, 0), cols], np.inf)
        lower = np.where(below >= 0, Z[np.maximum(below, 0), cols], -np.inf)
        Z[rows, cols] = truncnorm_draws(mean[rows, cols], sd[cols], lower, upper, rng)
    if layout.free_rows.size:
        r, c = layout.free_rows, layout.free_cols
        Z[r, c] = mean[r, c] + sd[c] * rng.standard_normal(r.size)
    return Z
