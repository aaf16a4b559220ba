import json

import numpy as np
import pytest

from rankfuse.kernels import RngStream
from rankfuse.simulation import (MixtureSpec, ScenarioSpec, SpecError, generate_mixture,
                                 generate_scenario, pairwise_coverage, random_blocks,
                                 run_comparison)


def test_pairwise_coverage_identity():
    assert pairwise_coverage(80, 16) == pytest.approx(16 * 5 * 4 / (80 * 79))
    assert round(100 * pairwise_coverage(80, 16), 2) == 5.06
    assert pairwise_coverage(10, 1) == 1.0


def test_random_blocks(rng):
    b = random_blocks(12, 3, rng)
    assert sorted(np.concatenate(b).tolist()) == list(range(12))
    with pytest.raises(SpecError):
        random_blocks(10, 3, rng)


def test_spec_presets_and_validation():
    s = ScenarioSpec(scenario=2)
    assert s.p == 3 and s.rho == 0.5 and s.quadratic
    with pytest.raises(SpecError):
        ScenarioSpec(scenario=7)
    with pytest.raises(SpecError):
        ScenarioSpec(scenario="custom", p=2)
    with pytest.raises(SpecError):
        ScenarioSpec(methods=("BARC", "XYZ"))
    with pytest.raises(SpecError):
        ScenarioSpec.from_dict({"sigma": 5, "bogus": 1})
    assert ScenarioSpec.from_dict({"methods": ["barc", "pl"]}).methods == ("BARC", "PL")


def test_generators(rng):
    X, mu, rk = generate_scenario(ScenarioSpec(scenario=1, n=20, m=4, blocks=4), rng)
    assert X.shape == (20, 4) and len(rk) == 4
    assert all(len(r.blocks) == 4 for r in rk)
    X2, mu2, _ = generate_scenario(ScenarioSpec(scenario=2, n=10, m=2), rng)
    assert np.all(mu2 - X2 @ np.array([3.0, 2.0, 1.0]) >= 0)
    X, labels, mus, rk = generate_mixture(MixtureSpec(m=6, n=18, groups=3), rng)
    assert mus.shape == (3, 18) and len(rk) == 6 and len(rk[0].blocks) == 3


def test_comparison_reproducible(tmp_path):
    spec = ScenarioSpec(n=12, m=4, replications=2, iterations=200, burn_in=50,
                        methods=("BARC", "BC", "MC2", "PL"))
    a = run_comparison(spec)
    b = run_comparison(spec)
    assert [r["distance"] for r in a.records] == [r["distance"] for r in b.records]
    assert len(a.records) == 8
    csv_path, js = a.write(tmp_path, {"n": 12})
    assert csv_path.read_text().splitlines()[0] == "replication,sigma,method,distance"
    summary = json.loads(js.read_text())
    assert "BARC" in json.dumps(summary)


def test_rng_streams_independent():
    a = RngStream(0, 0).generator().random(3)
    b = RngStream(0, 1).generator().random(3)
    assert not np.allclose(a, b)
    assert np.allclose(a, RngStream(0, 0).generator().random(3))
