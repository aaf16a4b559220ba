"""Reading and writing the long-format rankings CSV and the covariates CSV."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from .core import CovariateMatrix, EntitySet, RankingError, RankingList

RANKING_COLUMNS = ("ranker_id", "block_id", "position", "entity_id")


class ParseError(ValueError):
    """Malformed input file. Carries the 1-based line and column when known."""

    def __init__(self, message: str, path=None, line: int | None = None,
                 column: str | None = None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.column = column


def _open_rows(path):
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open file ({exc.strerror})", path) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path, 1) from None
        header = [h.strip() for h in header]
        rows = [(k + 2, row) for k, row in enumerate(reader) if any(c.strip() for c in row)]
    return header, rows


def read_covariates(path, standardize: bool = True):
    """Return ``(EntitySet, CovariateMatrix)`` from ``entity_id,<name1>,...``."""
    header, rows = _open_rows(path)
    if not header or header[0] != "entity_id":
        raise ParseError("first column must be 'entity_id'", path, 1, "entity_id")
    names = header[1:]
    ids, values = [], []
    for line, row in rows:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, line)
        ids.append(row[0].strip())
        vals = []
        for name, cell in zip(names, row[1:]):
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"not a number: {cell!r}", path, line, name) from None
        values.append(vals)
    if len(set(ids)) != len(ids):
        raise RankingError(f"{path}: duplicate entity ids in covariates file")
    entities = EntitySet(tuple(ids))
    arr = np.asarray(values, dtype=float).reshape(len(ids), len(names))
    cov = CovariateMatrix(arr, tuple(names))
    return entities, (cov.standardize() if standardize else cov)


def read_rankings(path, entities: EntitySet | None = None):
    """Parse the long-format rankings file.

    When ``entities`` is None the entity set is built from the file in order
    of first appearance. Returns ``(EntitySet, list[RankingList])`` with
    rankers in order of first appearance.
    """
    header, rows = _open_rows(path)
    missing = [c for c in RANKING_COLUMNS if c not in header]
    if missing:
        raise ParseError(f"missing required column {missing[0]!r}", path, 1, missing[0])
    col = {c: header.index(c) for c in RANKING_COLUMNS}

    grouped: dict[str, dict[str, list[tuple[int, str, int]]]] = defaultdict(dict)
    seen_ids: list[str] = []
    for line, row in rows:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, line)
        ranker = row[col["ranker_id"]].strip()
        block = row[col["block_id"]].strip()
        eid = row[col["entity_id"]].strip()
        try:
            pos = int(row[col["position"]])
        except ValueError:
            raise ParseError(
                f"position is not an integer: {row[col['position']]!r}", path, line, "position"
            ) from None
        if not ranker or not eid:
            raise ParseError("empty ranker_id or entity_id", path, line)
        grouped[ranker].setdefault(block, []).append((pos, eid, line))
        if eid not in seen_ids:
            seen_ids.append(eid)

    if entities is None:
        entities = EntitySet(tuple(seen_ids))
    rankings = []
    for ranker, blocks in grouped.items():
        out_blocks = []
        for block_id, items in blocks.items():
            items.sort()
            positions = [p for p, _, _ in items]
            if len(set(positions)) != len(positions):
                dup = next(p for p in positions if positions.count(p) > 1)
                raise RankingError(
                    f"ranker {ranker!r} block {block_id!r}: tie at position {dup}"
                )
            if positions != list(range(1, len(positions) + 1)):
                raise RankingError(
                    f"ranker {ranker!r} block {block_id!r}: positions are not 1..{len(positions)}"
                )
            out_blocks.append(tuple(entities.index(e) for _, e, _ in items))
        rankings.append(RankingList(ranker, tuple(out_blocks)))
    return entities, rankings


def write_rankings(path, rankings, entities: EntitySet) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RANKING_COLUMNS)
        for r in rankings:
            for b, block in enumerate(r.blocks):
                for k, i in enumerate(block):
                    w.writerow([r.ranker_id, b + 1, k + 1, entities.ids[i]])


def write_covariates(path, cov: CovariateMatrix, entities: EntitySet) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity_id", *cov.column_names])
        for eid, row in zip(entities.ids, cov.values):
            w.writerow([eid, *(repr(float(v)) for v in row)])
