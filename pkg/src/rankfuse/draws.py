"""Container for stored MCMC draws and its on-disk columnar format."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class PosteriorDraws:
    """Stored draws, pooled over chains.

    ``centered_mu`` holds mu - mean(mu) per draw. For the mixture model it is
    the across-ranker average score ``m^-1 sum_j mu^(j)`` (centred), and the
    per-ranker centred scores live in ``ranker_mu`` (draws x m x n) when kept.
    """

    centered_mu: np.ndarray
    beta: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray
    theta: np.ndarray | None = None
    weights: np.ndarray | None = None
    allocation: np.ndarray | None = None
    ranker_mu: np.ndarray | None = None
    ranker_mu_mean: np.ndarray | None = None
    entity_ids: tuple | None = None
    covariate_names: tuple | None = None
    ranker_ids: tuple | None = None
    model: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.centered_mu.ndim != 2:
            raise ValueError("centered_mu must be draws x n")
        if not np.allclose(self.centered_mu.sum(axis=1), 0.0, atol=1e-9 * max(1, self.n)):
            raise ValueError("stored score rows are not centred")

    @property
    def n_draws(self) -> int:
        return self.centered_mu.shape[0]

    @property
    def n(self) -> int:
        return self.centered_mu.shape[1]

    @property
    def p(self) -> int:
        return self.beta.shape[1]

    def chains(self):
        """Yield (chain_id, row index array) per chain."""
        for c in np.unique(self.chain):
            yield int(c), np.flatnonzero(self.chain == c)

    @classmethod
    def concatenate(cls, parts: list["PosteriorDraws"]) -> "PosteriorDraws":
        if len(parts) == 1:
            return parts[0]
        first = parts[0]

        def cat(name):
            vals = [getattr(p, name) for p in parts]
            if any(v is None for v in vals):
                return None
            return np.concatenate(vals, axis=0)

        rmm = None
        if all(p.ranker_mu_mean is not None for p in parts):
            w = np.array([p.n_draws for p in parts], dtype=float)
            rmm = np.tensordot(w / w.sum(), np.stack([p.ranker_mu_mean for p in parts]), axes=1)
        return cls(
            centered_mu=cat("centered_mu"), beta=cat("beta"), chain=cat("chain"),
            iteration=cat("iteration"), theta=cat("theta"), weights=cat("weights"),
            allocation=cat("allocation"), ranker_mu=cat("ranker_mu"),
            ranker_mu_mean=rmm, entity_ids=first.entity_ids,
            covariate_names=first.covariate_names, ranker_ids=first.ranker_ids,
            model=first.model, meta=dict(first.meta),
        )

    # -- persistence ---------------------------------------------------------

    def _columns(self):
        ent = self.entity_ids or tuple(str(i) for i in range(self.n))
        cols = [("chain", self.chain), ("iteration", self.iteration)]
        cols += [(f"mu[{e}]", self.centered_mu[:, k]) for k, e in enumerate(ent)]
        names = self.covariate_names or tuple(f"x{k + 1}" for k in range(self.p))
        cols += [(f"beta[{c}]", self.beta[:, k]) for k, c in enumerate(names)]
        if self.theta is not None:
            cols.append(("theta", self.theta))
        rankers = self.ranker_ids
        for label, arr in (("w", self.weights), ("q", self.allocation)):
            if arr is not None:
                rk = rankers or tuple(str(j) for j in range(arr.shape[1]))
                cols += [(f"{label}[{r}]", arr[:, j]) for j, r in enumerate(rk)]
        return cols

    def save(self, path) -> tuple[Path, Path]:
        """Write ``<path>.csv`` (one column per scalar) and ``<path>.json``."""
        path = Path(path)
        csv_path = path.with_suffix(".csv")
        json_path = path.with_suffix(".json")
        cols = self._columns()
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([c for c, _ in cols])
            data = np.column_stack([np.asarray(a, dtype=float) for _, a in cols])
            for row in data:
                w.writerow([_fmt(v) for v in row])
        schema = {
            "format": "rankfuse-draws/1",
            "model": self.model,
            "n_draws": self.n_draws,
            "chains": sorted(int(c) for c in np.unique(self.chain)),
            "entity_ids": list(self.entity_ids or []),
            "covariate_names": list(self.covariate_names or []),
            "ranker_ids": list(self.ranker_ids or []),
            "columns": [c for c, _ in cols],
            "meta": self.meta,
        }
        json_path.write_text(json.dumps(schema, indent=2))
        return csv_path, json_path


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def load_draw_columns(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a saved draws file back as ``(schema, {column: values})``."""
    path = Path(path)
    csv_path = path if path.suffix == ".csv" else path.with_suffix(".csv")
    json_path = csv_path.with_suffix(".json")
    schema = json.loads(json_path.read_text()) if json_path.exists() else {}
    with csv_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, r)) for r in reader if r]
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return schema, {h: data[:, k] for k, h in enumerate(header)}
