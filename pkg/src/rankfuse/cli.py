"""Command-line interface: ``rankfuse aggregate | simulate | diagnose``.

Exit codes: 0 success, 2 unreadable or malformed input, 3 invalid data or
options, 4 degenerate model (no estimate exists).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .barc import BARC, ConfigError
from .barcm import BARCM
from .barcw import BARCW
from .baselines import (ConvergenceError, CoverageError, PlDegeneracyError, borda,
                        build_mc_chain, fit_plackett_luce, stationary_distribution)
from .core import DimensionError, RankingError, rank_of_scores
from .draws import load_draw_columns
from .io import ParseError, read_covariates, read_rankings
from .kernels import DegenerateError
from .simulation import (MixtureSpec, ScenarioSpec, SpecError, load_spec,
                         run_mixture_study, run_px_study, run_sigma_grid, run_weight_study,
                         spec_to_dict)
from .summaries import build_report, diagnostics_report, scalar_diagnostics, write_table_csv

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_DEGENERATE = 0, 2, 3, 4

BAYES_MODELS = {"barc": BARC, "barcw": BARCW, "barcm": BARCM}
MODELS = tuple(BAYES_MODELS) + ("bc", "mc1", "mc2", "mc3", "pl")


class UsageError(ValueError):
    pass


def _err(msg: str) -> None:
    print(f"rankfuse: {msg}", file=sys.stderr)


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# -- aggregate -------------------------------------------------------------------

def _baseline(model, rankings, n):
    if model == "bc":
        return -np.asarray(borda(rankings, n).ranking.positions, dtype=float)
    if model == "pl":
        return fit_plackett_luce(rankings, n)
    return stationary_distribution(build_mc_chain(rankings, model.upper(), 0.05, n))


def cmd_aggregate(args) -> int:
    model = args.model
    if args.gamma is not None and model != "barcm":
        raise UsageError("--gamma only applies to --model barcm")
    if model not in BAYES_MODELS and args.keep_draws:
        raise UsageError("--keep-draws only applies to the Bayesian models")
    cov = None
    if args.covariates:
        entities, cov = read_covariates(args.covariates, standardize=not args.no_standardize)
        entities, rankings = read_rankings(args.rankings, entities)
    else:
        entities, rankings = read_rankings(args.rankings)
    ids = list(entities.ids)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if model in BAYES_MODELS:
        kw = dict(sigma_alpha=args.sigma_alpha, sigma_beta=args.sigma_beta,
                  n_iter=args.iterations, burn_in=args.burn_in, n_chains=args.chains,
                  standardize=False, random_state=args.seed, n_jobs=args.threads)
        if model == "barcm":
            kw["gamma"] = 1.0 if args.gamma is None else args.gamma
            kw["keep_ranker_draws"] = False
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = BAYES_MODELS[model](**kw).fit(rankings, cov, n_entities=entities.n,
                                                entity_ids=ids)
        for w in caught:
            _err(f"warning: {w.message}")
        draws = est.draws_
        draws.meta.update({"seed": args.seed, "iterations": args.iterations,
                           "burn_in": args.burn_in})
        diag = diagnostics_report(draws)
        report = build_report(draws, diagnostics={
            "min_mu_ess_per_1000": diag["min_mu_ess_per_1000"],
            "n_draws": diag["n_draws"], "n_chains": diag["n_chains"]})
        scores = est.scores_
        _dump(diag, out / "diagnostics.json")
        if args.keep_draws:
            draws.save(out / "draws")
    else:
        scores = _baseline(model, rankings, entities.n)
        order = rank_of_scores(scores).order
        report = {
            "model": model, "aggregated_order": [ids[i] for i in order],
            "mean_scores": {e: float(s) for e, s in zip(ids, scores)},
            "rank_intervals": None, "beta_summary": [], "weights_summary": None,
            "coclustering": None, "diagnostics": {},
        }
        _dump({}, out / "diagnostics.json")
    _dump(report, out / "result.json")
    write_table_csv(out / "aggregate.csv", ids, {model: scores})
    _err(f"{model}: top entity {report['aggregated_order'][0]!r}; results in {out}")
    if args.json:
        print(json.dumps({"model": model, "aggregated_order": report["aggregated_order"],
                          "out": str(out)}))
    return EXIT_OK


# -- simulate --------------------------------------------------------------------

STUDIES = ("comparison", "mixture", "homogeneous", "weights", "px")


def cmd_simulate(args) -> int:
    raw = load_spec(args.spec)
    if not isinstance(raw, dict):
        raise SpecError("spec must be a JSON object")
    raw = dict(raw)
    study = raw.pop("study", "comparison")
    if study not in STUDIES:
        raise SpecError(f"unknown study {study!r}; use one of {STUDIES}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if study == "comparison":
        sigmas = raw.pop("sigmas", None)
        spec = ScenarioSpec.from_dict(raw)
        res = run_sigma_grid(spec, sigmas or [spec.sigma])
        res.write(out, spec_to_dict(spec) | {"sigmas": sigmas or [spec.sigma]})
        summary = res.summary()
    elif study in ("mixture", "homogeneous"):
        gammas = raw.pop("gammas", [1.0])
        reps = int(raw.pop("replications", 20))
        if raw.pop("full_scale", False):
            raw["m"] = 69
        try:
            spec = MixtureSpec(**{k: tuple(v) if isinstance(v, list) else v
                                  for k, v in raw.items()})
        except TypeError as exc:
            raise SpecError(str(exc)) from exc
        summary = {str(k): v for k, v in
                   run_mixture_study(spec, gammas, reps, study == "mixture").items()}
        _dump({"spec": spec_to_dict(spec), "summary": summary}, out / "summary.json")
    elif study == "weights":
        try:
            summary = run_weight_study(**raw)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc
        _dump({"spec": raw, "summary": summary}, out / "summary.json")
    else:
        seeds = raw.pop("seeds", 5)
        spec = ScenarioSpec.from_dict(raw)
        summary = run_px_study(spec, range(int(seeds)))
        _dump({"spec": spec_to_dict(spec), "summary": summary}, out / "summary.json")
    _err(f"{study} study written to {out}")
    if args.json:
        print(json.dumps(summary, default=_jsonable))
    return EXIT_OK


# -- diagnose ----------------------------------------------------------------------

def cmd_diagnose(args) -> int:
    path = Path(args.draws)
    try:
        schema, cols = load_draw_columns(path)
    except (OSError, ValueError, StopIteration) as exc:
        raise ParseError(f"unreadable draws file ({exc})", path) from exc
    if "chain" not in cols:
        raise ParseError("draws file has no 'chain' column", path, 1, "chain")
    chain = cols["chain"].astype(int)
    scalars = {}
    for name, values in cols.items():
        if name in ("chain", "iteration") or name.startswith("q["):
            continue
        scalars[name] = scalar_diagnostics(values, chain, args.max_lag)
    mu = [v["ess_per_1000"] for k, v in scalars.items() if k.startswith("mu[")]
    report = {
        "model": schema.get("model", ""),
        "n_draws": int(chain.size),
        "n_chains": int(np.unique(chain).size),
        "min_mu_ess_per_1000": float(min(mu)) if mu else None,
        "constant": sorted(k for k, v in scalars.items() if v["constant"]),
        "scalars": scalars,
    }
    target = Path(args.out) if args.out else path.with_name(path.stem + "_diagnostics.json")
    _dump(report, target)
    for name, v in scalars.items():
        flag = "  (constant)" if v["constant"] else ""
        _err(f"{name}: ESS {v['ess']:.0f} ({v['ess_per_1000']:.0f}/1000), "
             f"lag-1 ACF {v['acf'][1] if len(v['acf']) > 1 else 0:.3f}{flag}")
    if args.json:
        print(json.dumps({k: report[k] for k in
                          ("model", "n_draws", "n_chains", "min_mu_ess_per_1000", "constant")}))
    return EXIT_OK


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rankfuse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("aggregate", help="aggregate ranking lists")
    a.add_argument("--model", choices=MODELS, default="barc")
    a.add_argument("--rankings", required=True)
    a.add_argument("--covariates")
    a.add_argument("--iterations", type=int, default=5000, help="sweeps per chain, burn-in included")
    a.add_argument("--burn-in", type=int, default=1000)
    a.add_argument("--chains", type=int, default=4)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--sigma-alpha", type=float, default=1.0)
    a.add_argument("--sigma-beta", type=float, default=100.0)
    a.add_argument("--gamma", type=float, default=None, help="concentration (barcm only)")
    a.add_argument("--no-standardize", action="store_true")
    a.add_argument("--keep-draws", action="store_true")
    a.add_argument("--out", default="rankfuse-out")
    a.add_argument("--threads", type=int, default=None)
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("simulate", help="run a simulation study from a JSON spec")
    s.add_argument("spec")
    s.add_argument("--out", default="rankfuse-sim")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("diagnose", help="MCMC diagnostics of a saved draws file")
    d.add_argument("draws")
    d.add_argument("--out")
    d.add_argument("--max-lag", type=int, default=50)
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, SpecError) as exc:
        _err(str(exc))
        return EXIT_PARSE
    except (PlDegeneracyError, DegenerateError, ConvergenceError) as exc:
        _err(f"degenerate model: {exc}")
        return EXIT_DEGENERATE
    except (RankingError, CoverageError, DimensionError, ConfigError, UsageError,
            ValueError) as exc:
        _err(str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
