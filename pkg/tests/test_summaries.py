import math

import numpy as np
import pytest

from rankfuse.draws import PosteriorDraws, load_draw_columns
from rankfuse.summaries import (acf, aggregate_rank, build_report, coclustering_matrix,
                                consensus_partition, covariate_effect_summary,
                                diagnostics_report, draw_positions, effective_sample_size,
                                nearest_rank_quantile, rank_intervals, scalar_diagnostics,
                                write_table_csv)


def _draws(rng, L=400, n=4, p=2, chains=2, **kw):
    mu = rng.standard_normal((L, n)) + np.arange(n)[::-1]
    mu -= mu.mean(axis=1, keepdims=True)
    return PosteriorDraws(centered_mu=mu, beta=rng.standard_normal((L, p)) + [1.0, -1.0],
                          chain=np.repeat(np.arange(chains), L // chains),
                          iteration=np.tile(np.arange(L // chains), chains), **kw)


def test_ess_iid_and_ar1(rng):
    N = 20_000
    x = rng.standard_normal(N)
    assert effective_sample_size(x) == pytest.approx(N, rel=0.1)
    rho = 0.6
    y = np.empty(N)
    y[0] = x[0]
    for t in range(1, N):
        y[t] = rho * y[t - 1] + math.sqrt(1 - rho ** 2) * x[t]
    assert effective_sample_size(y) == pytest.approx(N * (1 - rho) / (1 + rho), rel=0.15)


def test_ess_edge_cases():
    assert effective_sample_size(np.ones(50)) == 50.0
    with pytest.raises(ValueError):
        effective_sample_size(np.arange(5.0))


def test_acf_matches_direct(rng):
    x = rng.standard_normal(300)
    xc = x - x.mean()
    direct = [xc[: x.size - k] @ xc[k:] / (xc @ xc) for k in range(6)]
    assert np.allclose(acf(x, 5), direct)


def test_scalar_diagnostics_pools_chains(rng):
    v = rng.standard_normal(1000)
    d = scalar_diagnostics(v, np.repeat([0, 1], 500))
    assert d["ess"] == pytest.approx(sum(d["ess_by_chain"].values()))
    assert d["ess_per_1000"] == pytest.approx(d["ess"])
    assert not d["constant"] and len(d["trace"]) == 200


def test_nearest_rank_quantile():
    s = np.arange(1, 21)
    assert nearest_rank_quantile(s, 0.025) == 1
    assert nearest_rank_quantile(s, 0.975) == 20
    assert nearest_rank_quantile(s, 0.5) == 10


def test_positions_and_intervals():
    mu = np.array([[2.0, 1.0, -3.0], [1.0, 2.0, -3.0]])
    assert draw_positions(mu).tolist() == [[1, 2, 3], [2, 1, 3]]
    with pytest.warns(UserWarning):
        iv = rank_intervals(mu, 0.95)
    assert iv.tolist() == [[1, 2], [1, 2], [3, 3]]
    with pytest.raises(ValueError):
        rank_intervals(mu, 1.0)


def test_aggregate_rank(rng):
    res = aggregate_rank(_draws(rng))
    assert list(res.aggregated.order) == [0, 1, 2, 3]
    assert res.rank_intervals.shape == (4, 2)
    assert np.all(res.rank_intervals[:, 0] <= res.rank_intervals[:, 1])
    assert res.chains["n_chains"] == 2


def test_covariate_summary(rng):
    s = covariate_effect_summary(_draws(rng, covariate_names=("a", "b")))
    assert [r["name"] for r in s] == ["a", "b"]
    assert s[0]["lower"] < s[0]["mean"] < s[0]["upper"]


def test_coclustering_and_consensus():
    q = np.array([[0, 0, 1], [0, 0, 1], [0, 1, 1]])
    P = coclustering_matrix(q)
    assert P[0, 1] == pytest.approx(2 / 3) and P[1, 2] == pytest.approx(1 / 3)
    assert consensus_partition(q).tolist() == [0, 0, 1]


def test_report_and_files(tmp_path, rng):
    d = _draws(rng, weights=np.full((400, 3), 1.0), ranker_ids=("r1", "r2", "r3"),
               entity_ids=("a", "b", "c", "e"), model="barcw")
    d.weights[::2, 0] = 2.0
    rep = build_report(d, diagnostics=diagnostics_report(d))
    for key in ("model", "aggregated_order", "mean_scores", "rank_intervals", "interval_level",
                "beta_summary", "weights_summary", "coclustering", "diagnostics"):
        assert key in rep
    assert rep["aggregated_order"][0] == "a"
    assert rep["weights_summary"]["r1"]["mean"] == pytest.approx(1.5)
    csv_path, _ = d.save(tmp_path / "draws")
    schema, cols = load_draw_columns(csv_path)
    assert schema["model"] == "barcw"
    assert np.allclose(cols["mu[a]"], d.centered_mu[:, 0])
    t = write_table_csv(tmp_path / "t.csv", list(d.entity_ids), {"x": [1, 3, 2, 0]})
    lines = t.read_text().splitlines()
    assert lines[0] == "entity,x_score,x_rank" and lines[1].startswith("b,3,1")
