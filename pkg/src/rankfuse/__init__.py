"""Bayesian aggregation of ranking lists with entity covariates."""

from .barc import BARC, BarcConfig, run_barc, simulate_rankings
from .barcm import BARCM, DpConfig, crp_expected_clusters, run_barcm
from .barcw import BARCW, run_barcw
from .baselines import (BordaCount, MarkovChainRank, PlackettLuce, borda, build_mc_chain,
                        fit_plackett_luce, pl_probability, stationary_distribution)
from .core import (CovariateMatrix, EntitySet, FullRanking, RankingError, RankingList,
                   TieError, footrule_distance, kendall_distance, rand_index, rank_of_scores)
from .draws import PosteriorDraws
from .io import ParseError, read_covariates, read_rankings
from .summaries import (aggregate_rank, covariate_effect_summary, effective_sample_size,
                        rank_intervals)

__all__ = [
    "BARC", "BARCW", "BARCM", "BarcConfig", "DpConfig", "run_barc", "run_barcw", "run_barcm",
    "simulate_rankings", "crp_expected_clusters",
    "BordaCount", "MarkovChainRank", "PlackettLuce", "borda", "build_mc_chain",
    "fit_plackett_luce", "pl_probability", "stationary_distribution",
    "CovariateMatrix", "EntitySet", "FullRanking", "RankingError", "RankingList", "TieError",
    "footrule_distance", "kendall_distance", "rand_index", "rank_of_scores",
    "PosteriorDraws", "ParseError", "read_covariates", "read_rankings",
    "aggregate_rank", "covariate_effect_summary", "effective_sample_size", "rank_intervals",
    "fixture_path",
]


def fixture_path(name: str = "nfl-2014-wk12"):
    """Directory of a dataset shipped with the package."""
    from importlib.resources import files

    return files(__name__) / "fixtures" / name
