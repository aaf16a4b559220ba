"""Simulation harness: scenario generators and experiment runners.

Every experiment is reproducible from its spec: replication r draws its data
from stream r of the spec seed and seeds its samplers from a second stream.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .barc import BARC, simulate_rankings
from .barcm import BARCM, crp_expected_clusters
from .barcw import BARCW
from .baselines import (ConvergenceError, CoverageError, PlDegeneracyError, borda,
                        build_mc_chain, fit_plackett_luce, stationary_distribution)
from .core import kendall_distance, rand_index, rank_of_scores
from .kernels import RngStream
from .summaries import acf

METHODS = ("BARC", "BAR", "BARCW", "BARCM", "BC", "MC1", "MC2", "MC3", "PL")

SCENARIOS = {
    1: {"p": 4, "rho": 0.2, "beta_true": (3.0, 2.0, 1.0, 0.5), "quadratic": False},
    2: {"p": 3, "rho": 0.5, "beta_true": (3.0, 2.0, 1.0), "quadratic": True},
    3: {"p": 4, "rho": 0.5, "beta_true": None, "quadratic": True},
}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation configuration. Preset scenarios fill p, rho and beta_true."""

    scenario: int | str = 1
    n: int = 50
    m: int = 10
    p: int | None = None
    rho: float | None = None
    sigma: float = 5.0
    beta_true: tuple | None = None
    blocks: int = 1
    replications: int = 100
    seed: int = 0
    methods: tuple = ("BARC", "BC")
    iterations: int = 5000
    burn_in: int = 1000
    sigma_alpha: float = 1.0
    sigma_beta: float = 100.0
    chains: int = 1
    gamma: float = 1.0

    def __post_init__(self):
        sc = self.scenario
        if sc not in SCENARIOS and sc != "custom":
            raise SpecError(f"unknown scenario {sc!r}; use 1, 2, 3 or 'custom'")
        if sc in SCENARIOS:
            pre = SCENARIOS[sc]
            for name in ("p", "rho", "beta_true"):
                if getattr(self, name) is None:
                    object.__setattr__(self, name, pre[name])
        elif self.p is None or self.rho is None or self.beta_true is None:
            raise SpecError("a custom scenario needs p, rho and beta_true")
        if self.beta_true is not None:
            object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
            if len(self.beta_true) != self.p:
                raise SpecError("beta_true must have p entries")
        object.__setattr__(self, "methods", tuple(str(m).upper() for m in self.methods))
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise SpecError(f"unknown or empty methods {sorted(bad)}")
        if self.n < 2 or self.m < 1 or self.replications < 1 or self.blocks < 1:
            raise SpecError("n >= 2, m >= 1, replications >= 1 and blocks >= 1 required")
        if not self.sigma > 0:
            raise SpecError("sigma must be positive")

    @property
    def quadratic(self) -> bool:
        return SCENARIOS[self.scenario]["quadratic"] if self.scenario in SCENARIOS else False

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown spec fields {sorted(extra)}")
        d = dict(d)
        for k in ("methods", "beta_true"):
            if k in d and d[k] is not None:
                d[k] = tuple(d[k])
        return cls(**d)


def ar_covariance(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def random_blocks(n: int, k: int, rng) -> list[np.ndarray]:
    """Split entities into k equal groups uniformly at random."""
    if n % k:
        raise SpecError(f"n={n} is not divisible into {k} equal blocks")
    return list(np.sort(rng.permutation(n).reshape(k, n // k), axis=1))


def pairwise_coverage(n: int, k: int) -> float:
    """Fraction of entity pairs that share one of k equal blocks."""
    size = n // k
    return k * size * (size - 1) / (n * (n - 1))


def generate_scenario(spec: ScenarioSpec, rng):
    """Return ``(X, mu_true, rankings)`` for one replication."""
    X = rng.multivariate_normal(np.zeros(spec.p), ar_covariance(spec.p, spec.rho), size=spec.n,
                                method="cholesky")
    mu = np.zeros(spec.n)
    if spec.beta_true is not None:
        mu += X @ np.asarray(spec.beta_true)
    if spec.quadratic:
        mu += (X ** 2).sum(axis=1)
    blocks = random_blocks(spec.n, spec.blocks, rng) if spec.blocks > 1 else None
    return X, mu, simulate_rankings(mu, spec.sigma, spec.m, blocks, rng)


def _sampler_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(rep, 1)).generate_state(1)[0])


def aggregate_scores(method: str, rankings, X, n: int, spec: ScenarioSpec, seed: int) -> np.ndarray:
    """Scores (higher is better) from one aggregation method."""
    kw = dict(sigma_alpha=spec.sigma_alpha, sigma_beta=spec.sigma_beta, n_iter=spec.iterations,
              burn_in=spec.burn_in, n_chains=spec.chains, random_state=seed, n_jobs=1)
    if method == "BARC":
        return BARC(**kw).fit(rankings, X).scores_
    if method == "BAR":
        return BARC(**kw).fit(rankings, None, n_entities=n).scores_
    if method == "BARCW":
        return BARCW(**kw).fit(rankings, X).scores_
    if method == "BARCM":
        return BARCM(gamma=spec.gamma, keep_ranker_draws=False, **kw).fit(rankings, X).scores_
    if method == "BC":
        return -np.asarray(borda(rankings, n).ranking.positions, dtype=float)
    if method in ("MC1", "MC2", "MC3"):
        return stationary_distribution(build_mc_chain(rankings, method, 0.05, n))
    if method == "PL":
        return fit_plackett_luce(rankings, n)
    raise SpecError(f"unknown method {method}")


@dataclass
class ExperimentResult:
    records: list = field(default_factory=list)
    runtime: float = 0.0

    def summary(self) -> dict:
        out = {}
        keys = sorted({(r["sigma"], r["method"]) for r in self.records},
                      key=lambda t: (t[0], METHODS.index(t[1])))
        for s, meth in keys:
            d = np.array([r["distance"] for r in self.records
                          if r["method"] == meth and r["sigma"] == s], dtype=float)
            ok = d[~np.isnan(d)]
            out.setdefault(str(s), {})[meth] = {
                "mean": float(ok.mean()) if ok.size else None,
                "sd": float(ok.std(ddof=1)) if ok.size > 1 else None,
                "n": int(ok.size),
                "missing": int(np.isnan(d).sum()),
            }
        return out

    def mean_distance(self, method: str, sigma: float | None = None) -> float:
        d = [r["distance"] for r in self.records if r["method"] == method
             and (sigma is None or r["sigma"] == sigma)]
        return float(np.nanmean(d))

    def write(self, out_dir, spec: dict | None = None) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "results.csv"
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replication", "sigma", "method", "distance"])
            for r in self.records:
                dist = "" if np.isnan(r["distance"]) else repr(float(r["distance"]))
                w.writerow([r["replication"], repr(float(r["sigma"])), r["method"], dist])
        json_path = out / "summary.json"
        json_path.write_text(json.dumps(
            {"spec": spec or {}, "summary": self.summary(), "runtime_seconds": self.runtime},
            indent=2))
        return csv_path, json_path


def run_comparison(spec: ScenarioSpec, methods=None) -> ExperimentResult:
    """Normalised Kendall distance to the true ranking for each method and replication.

    Methods that cannot run on a replication (disconnected comparisons for
    PL, uncovered entities for the Markov chains) are recorded as missing.
    """
    methods = tuple(m.upper() for m in (methods or spec.methods))
    if not methods:
        raise SpecError("no methods given")
    t0 = time.perf_counter()
    res = ExperimentResult()
    for rep in range(spec.replications):
        rng = RngStream(spec.seed, rep).generator()
        X, mu, rankings = generate_scenario(spec, rng)
        truth = rank_of_scores(mu)
        seed = _sampler_seed(spec.seed, rep)
        for meth in methods:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", UserWarning)
                    scores = aggregate_scores(meth, rankings, X, spec.n, spec, seed)
                dist = kendall_distance(rank_of_scores(scores), truth)
            except (PlDegeneracyError, CoverageError, ConvergenceError):
                dist = float("nan")
            res.records.append({"replication": rep, "sigma": spec.sigma, "method": meth,
                                "distance": dist})
    res.runtime = time.perf_counter() - t0
    return res


def run_sigma_grid(spec: ScenarioSpec, sigmas, methods=None) -> ExperimentResult:
    out = ExperimentResult()
    for s in sigmas:
        r = run_comparison(replace(spec, sigma=float(s)), methods)
        out.records += r.records
        out.runtime += r.runtime
    return out


# -- mixture and homogeneous studies -----------------------------------------------

@dataclass(frozen=True)
class MixtureSpec:
    m: int = 30
    n: int = 108
    p: int = 11
    groups: int = 9
    rho: float = 0.2
    proportions: tuple = (0.5, 0.3, 0.2)
    alpha_sd: float = 2.0
    sigma: float = 1.0
    iterations: int = 1500
    burn_in: int = 500
    seed: int = 0

    @classmethod
    def full_scale(cls, **kw) -> "MixtureSpec":
        return cls(m=69, **kw)


def generate_mixture(spec: MixtureSpec, rng, heterogeneous: bool = True):
    """Return ``(X, labels, mus, rankings)``; ``mus`` has one score row per component."""
    X = rng.multivariate_normal(np.zeros(spec.p), ar_covariance(spec.p, spec.rho), size=spec.n,
                                method="cholesky")
    K = len(spec.proportions) if heterogeneous else 1
    alpha = spec.alpha_sd * rng.standard_normal((K, spec.n))
    beta = rng.standard_normal((K, spec.p))
    mus = alpha + beta @ X.T
    if heterogeneous:
        labels = rng.choice(K, size=spec.m, p=np.asarray(spec.proportions))
    else:
        labels = np.zeros(spec.m, dtype=int)
    blocks = random_blocks(spec.n, spec.groups, rng)
    rankings = []
    for j in range(spec.m):
        r = simulate_rankings(mus[labels[j]], spec.sigma, 1, blocks, rng)[0]
        rankings.append(type(r)(str(j), r.blocks))
    return X, labels, mus, rankings


def run_mixture_study(spec: MixtureSpec, gamma_grid, reps: int, heterogeneous: bool = True,
                      method: str = "BARCM") -> dict:
    """Clustering accuracy and cluster counts of BARCM per concentration value.

    Accuracy is the posterior-mean Rand index between sampled allocations
    and the generating labels.
    """
    out = {}
    for g in gamma_grid:
        ri, counts = [], []
        for rep in range(reps):
            rng = RngStream(spec.seed, rep).generator()
            X, labels, _, rankings = generate_mixture(spec, rng, heterogeneous)
            est = BARCM(gamma=float(g), n_iter=spec.iterations, burn_in=spec.burn_in,
                        random_state=_sampler_seed(spec.seed, rep), keep_ranker_draws=False,
                        n_jobs=1)
            est.fit(rankings, X)
            q = est.draws_.allocation
            ri.append(float(np.mean([rand_index(row, labels) for row in q])))
            counts.append(est.n_clusters_)
        out[float(g)] = {
            "rand_index": float(np.mean(ri)),
            "posterior_clusters": float(np.mean(counts)),
            "prior_clusters": crp_expected_clusters(spec.m, float(g)),
            "per_rep_rand_index": ri,
            "per_rep_clusters": counts,
        }
    return out


# -- ranker weights ------------------------------------------------------------------

def run_weight_study(reps: int = 20, n: int = 40, m: int = 15,
                     noise_sd=(2 ** -0.5, 1.0, 2 ** 0.5), iterations: int = 3000,
                     burn_in: int = 1000, seed: int = 0) -> dict:
    """BARCW on rankers split into equal groups with different noise levels.

    Scores follow the first scenario's linear covariate model. Reports, per
    replication, the mean posterior weight of each group and whether those
    means decrease with the noise level.
    """
    sds = np.asarray(noise_sd, dtype=float)
    groups = np.repeat(np.arange(sds.size), -(-m // sds.size))[:m]
    spec = ScenarioSpec(scenario=1, n=n, m=m)
    group_means, ordered = [], []
    for rep in range(reps):
        rng = RngStream(seed, rep).generator()
        X = rng.multivariate_normal(np.zeros(spec.p), ar_covariance(spec.p, spec.rho), size=n,
                                    method="cholesky")
        mu = X @ np.asarray(spec.beta_true)
        rankings = simulate_rankings(mu, sds[groups], m, rng=rng)
        est = BARCW(n_iter=iterations, burn_in=burn_in, random_state=_sampler_seed(seed, rep),
                    n_jobs=1).fit(rankings, X)
        gm = [float(est.weights_[groups == g].mean()) for g in range(sds.size)]
        group_means.append(gm)
        ordered.append(bool(np.all(np.diff(gm) < 0)) if np.all(np.diff(sds) > 0) else None)
    return {"group_mean_weights": group_means, "ordered": ordered,
            "fraction_ordered": float(np.mean(ordered))}


# -- PX versus plain data augmentation ----------------------------------------------------

def run_px_study(spec: ScenarioSpec, seeds=range(5), max_lag: int = 50) -> dict:
    """ACF of the first coefficient under PX-DA and plain DA on shared data.

    For each seed one data set is generated, then both samplers run from
    the same sampler seed.
    """
    if spec.p < 1:
        raise SpecError("the study needs at least one covariate")
    curves = {"px": [], "plain": []}
    for s in seeds:
        rng = RngStream(spec.seed, int(s)).generator()
        X, _, rankings = generate_scenario(spec, rng)
        seed = _sampler_seed(spec.seed, int(s))
        for key, px in (("px", True), ("plain", False)):
            est = BARC(sigma_alpha=spec.sigma_alpha, sigma_beta=spec.sigma_beta,
                       n_iter=spec.iterations, burn_in=spec.burn_in, px=px,
                       random_state=seed, n_jobs=1).fit(rankings, X)
            curves[key].append(acf(est.draws_.beta[:, 0], max_lag))
    px, plain = np.mean(curves["px"], axis=0), np.mean(curves["plain"], axis=0)
    return {
        "acf_px": px.tolist(),
        "acf_plain": plain.tolist(),
        "lag1_px": float(px[1]),
        "lag1_plain": float(plain[1]),
        "iact_px": float(1 + 2 * px[1:].sum()),
        "iact_plain": float(1 + 2 * plain[1:].sum()),
    }


def load_spec(path) -> dict:
    """Read a JSON experiment spec file."""
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"{path}: {exc}") from exc


def spec_to_dict(spec) -> dict:
    d = asdict(spec)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
