import json
import subprocess
import sys

import pytest

from rankfuse import fixture_path
from rankfuse.cli import main

NFL = fixture_path()
FAST = ["--iterations", "200", "--burn-in", "50", "--chains", "2"]


def _agg(tmp_path, *extra, name="out"):
    out = tmp_path / name
    argv = ["aggregate", "--rankings", str(NFL / "rankings.csv"),
            "--covariates", str(NFL / "covariates.csv"), "--out", str(out), *extra]
    return main(argv), out


@pytest.mark.parametrize("model", ["bc", "mc1", "mc2", "mc3", "pl"])
def test_baselines_put_luck_first(tmp_path, model):
    code, out = _agg(tmp_path, "--model", model)
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert res["aggregated_order"][0] == "Andrew Luck"


def test_barcw_outputs_and_determinism(tmp_path):
    code, a = _agg(tmp_path, "--model", "barcw", "--keep-draws", *FAST, name="a")
    assert code == 0
    _, b = _agg(tmp_path, "--model", "barcw", "--keep-draws", *FAST, name="b")
    ra = json.loads((a / "result.json").read_text())
    assert ra["aggregated_order"][0] == "Andrew Luck"
    assert [r["name"] for r in ra["beta_summary"]][-1] == "R1st"
    assert len(ra["weights_summary"]) == 13
    for f in ("result.json", "aggregate.csv", "draws.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert main(["diagnose", str(a / "draws.csv")]) == 0
    diag = json.loads((a / "draws_diagnostics.json").read_text())
    assert diag["n_draws"] == 300 and diag["n_chains"] == 2
    assert "w[expert01]" in diag["scalars"]


def test_barcm_and_barc(tmp_path):
    assert _agg(tmp_path, "--model", "barcm", "--gamma", "0.5", *FAST, name="m")[0] == 0
    code, out = _agg(tmp_path, "--model", "barc", *FAST, name="c")
    assert code == 0 and (out / "diagnostics.json").exists()


def test_exit_codes(tmp_path, capsys):
    assert main(["aggregate", "--rankings", str(tmp_path / "missing.csv")]) == 2
    assert _agg(tmp_path, "--model", "barc", "--gamma", "1")[0] == 3
    assert _agg(tmp_path, "--model", "bc", "--keep-draws")[0] == 3
    tie = tmp_path / "tie.csv"
    tie.write_text("ranker_id,block_id,position,entity_id\na,1,1,x\na,1,1,y\n")
    assert main(["aggregate", "--model", "bc", "--rankings", str(tie)]) == 3
    deg = tmp_path / "deg.csv"
    deg.write_text("ranker_id,block_id,position,entity_id\na,1,1,x\na,1,2,y\nb,1,1,x\nb,1,2,y\n")
    assert main(["aggregate", "--model", "pl", "--rankings", str(deg),
                 "--out", str(tmp_path / "d")]) == 4
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", str(bad)]) == 2
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"study": "comparison", "scenario": 9}))
    assert main(["simulate", str(spec)]) == 2
    assert main(["diagnose", str(tmp_path / "none.csv")]) == 2
    assert "rankfuse:" in capsys.readouterr().err


def test_simulate_comparison(tmp_path):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"n": 10, "m": 3, "replications": 2, "iterations": 150,
                                "burn_in": 50, "methods": ["BARC", "BC"], "sigmas": [1, 5]}))
    assert main(["simulate", str(spec), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "results.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 2 * 2


def test_console_module_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "rankfuse.cli", "aggregate", "--model", "bc",
                        "--rankings", str(NFL / "rankings.csv"), "--out", str(tmp_path / "x"),
                        "--json"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["aggregated_order"][0] == "Andrew Luck"
