import numpy as np
import pytest

from rankfuse.core import RankingError, RankingList
from rankfuse.io import (ParseError, read_covariates, read_rankings, write_covariates,
                         write_rankings)


def _write(path, text):
    path.write_text(text)
    return path


def test_round_trip(tmp_path, nfl):
    entities, cov, rankings = nfl
    write_rankings(tmp_path / "r.csv", rankings, entities)
    write_covariates(tmp_path / "c.csv", cov, entities)
    e2, c2 = read_covariates(tmp_path / "c.csv", standardize=False)
    _, r2 = read_rankings(tmp_path / "r.csv", e2)
    assert e2.ids == entities.ids
    assert np.allclose(c2.values, cov.values)
    assert [r.blocks for r in r2] == [r.blocks for r in rankings]


def test_fixture_shape(nfl):
    entities, cov, rankings = nfl
    assert entities.n == 24 and cov.p == 11 and len(rankings) == 13
    assert sorted(len(r.entities) for r in rankings)[:3] == [21, 22, 22]


def test_blocks_and_first_appearance(tmp_path):
    p = _write(tmp_path / "r.csv", "ranker_id,block_id,position,entity_id\n"
               "a,1,2,y\na,1,1,x\na,2,1,z\nb,1,1,z\n")
    ents, rk = read_rankings(p)
    assert ents.ids == ("y", "x", "z")
    assert rk[0] == RankingList("a", ((1, 0), (2,)))
    assert rk[1].blocks == ((2,),)


@pytest.mark.parametrize("text, match", [
    ("ranker_id,position,entity_id\na,1,x\n", "block_id"),
    ("ranker_id,block_id,position,entity_id\na,1,one,x\n", "line 2"),
    ("ranker_id,block_id,position,entity_id\na,1,1\n", "expected 4 fields"),
    ("", "empty file"),
])
def test_parse_errors(tmp_path, text, match):
    with pytest.raises(ParseError, match=match):
        read_rankings(_write(tmp_path / "r.csv", text))


def test_missing_file(tmp_path):
    with pytest.raises(ParseError, match="cannot open"):
        read_rankings(tmp_path / "nope.csv")


def test_tie_and_gap_are_ranking_errors(tmp_path):
    tie = "ranker_id,block_id,position,entity_id\na,1,1,x\na,1,1,y\n"
    gap = "ranker_id,block_id,position,entity_id\na,1,1,x\na,1,3,y\n"
    with pytest.raises(RankingError, match="tie"):
        read_rankings(_write(tmp_path / "t.csv", tie))
    with pytest.raises(RankingError, match="not 1..2"):
        read_rankings(_write(tmp_path / "g.csv", gap))


def test_unknown_entity_against_covariates(tmp_path):
    c = _write(tmp_path / "c.csv", "entity_id,x1\na,1\nb,2\n")
    r = _write(tmp_path / "r.csv", "ranker_id,block_id,position,entity_id\nj,1,1,a\nj,1,2,zz\n")
    ents, _ = read_covariates(c)
    with pytest.raises(RankingError):
        read_rankings(r, ents)


def test_covariate_parse_errors(tmp_path):
    with pytest.raises(ParseError, match="entity_id"):
        read_covariates(_write(tmp_path / "a.csv", "id,x\na,1\n"))
    with pytest.raises(ParseError, match="column 'x'"):
        read_covariates(_write(tmp_path / "b.csv", "entity_id,x\na,abc\n"))
