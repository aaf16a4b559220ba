import numpy as np
import pytest

from rankfuse import fixture_path
from rankfuse.io import read_covariates, read_rankings


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def nfl():
    d = fixture_path()
    entities, cov = read_covariates(d / "covariates.csv")
    _, rankings = read_rankings(d / "rankings.csv", entities)
    return entities, cov, rankings
