"""Ternary prior adjacency: associated / unlikely / unknown per pair.

External evidence arrives either as a sparse score table (pair scores in
[0, 1] plus the set of ids present in the source database) or as a dense
matrix with cells in {1, 0, NA}.  Scores above a threshold mark a pair
associated; present-but-low scores mark it unlikely; unknown scores can be
promoted to associated by strong replicate correlation, and pairs missing
from the database stay unknown.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .timeseries import DataError


class Ternary(enum.Enum):
    ZERO = 0
    ONE = 1
    NA = -1

    def __str__(self) -> str:
        return {Ternary.ZERO: "0", Ternary.ONE: "1", Ternary.NA: "NA"}[self]


_CODE = {Ternary.ZERO: 0, Ternary.ONE: 1, Ternary.NA: -1}
_FROM_CODE = {0: Ternary.ZERO, 1: Ternary.ONE, -1: Ternary.NA}


@dataclass
class PriorAdjacency:
    """Symmetric N x N ternary matrix; diagonal fixed to ONE."""

    gene_ids: list[str]
    codes: np.ndarray  # int8, values in {1, 0, -1}

    def __post_init__(self):
        c = np.asarray(self.codes, dtype=np.int8)
        n = len(self.gene_ids)
        if c.shape != (n, n):
            raise DataError("prior codes shape does not match gene ids")
        if not np.all(np.isin(c, (-1, 0, 1))):
            raise DataError("prior entries must be 1, 0, or NA")
        if not np.array_equal(c, c.T):
            raise DataError("prior matrix must be symmetric")
        c = c.copy()
        np.fill_diagonal(c, 1)
        self.codes = c

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    def lookup(self, i: int, j: int) -> Ternary:
        n = self.n_genes
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"pair index ({i}, {j}) out of range for N={n}")
        return _FROM_CODE[int(self.codes[i, j])]

    @classmethod
    def all_na(cls, gene_ids: list[str]) -> "PriorAdjacency":
        n = len(gene_ids)
        codes = np.full((n, n), -1, dtype=np.int8)
        np.fill_diagonal(codes, 1)
        return cls(list(gene_ids), codes)


@dataclass
class ScoreTable:
    """Sparse pair scores plus the set of ids covered by the source database.

    `scores` maps unordered id pairs to a float in [0, 1], or to None when the
    pair is listed but its score is unknown.
    """

    scores: dict[tuple[str, str], float | None]
    db_genes: set[str]

    @staticmethod
    def _key(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a <= b else (b, a)

    @classmethod
    def from_rows(cls, rows, db_genes) -> "ScoreTable":
        scores: dict[tuple[str, str], float | None] = {}
        for a, b, s in rows:
            if s is not None:
                s = float(s)
                if not (0.0 <= s <= 1.0):
                    raise DataError(f"score {s} for pair ({a}, {b}) outside [0, 1]")
            key = cls._key(a, b)
            if key in scores and scores[key] != s:
                raise DataError(f"conflicting scores for pair ({a}, {b})")
            scores[key] = s
        return cls(scores, set(db_genes))

    def get(self, a: str, b: str):
        """(listed, score) for the unordered pair."""
        key = self._key(a, b)
        if key in self.scores:
            return True, self.scores[key]
        return False, None


def build_prior(
    scores: ScoreTable,
    gene_ids: list[str],
    replicate_corr: np.ndarray | None = None,
    score_threshold: float = 0.5,
    corr_threshold: float = 0.8,
) -> PriorAdjacency:
    """Assemble the ternary adjacency for `gene_ids` from a score table.

    Rules, per unordered pair:

    * score present and > score_threshold  -> ONE
    * score present and <= score_threshold -> ZERO
    * both ids in the database but score unknown -> ONE when the replicate
      correlation exceeds corr_threshold, else NA
    * either id absent from the database -> NA
    """
    if not (0.0 < score_threshold < 1.0) or not (0.0 < corr_threshold < 1.0):
        raise ValueError("thresholds must lie in (0, 1)")
    n = len(gene_ids)
    if replicate_corr is not None:
        replicate_corr = np.asarray(replicate_corr, dtype=float)
        if replicate_corr.shape != (n, n):
            raise DataError("replicate correlation shape does not match gene ids")
    codes = np.full((n, n), -1, dtype=np.int8)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = gene_ids[i], gene_ids[j]
            listed, s = scores.get(a, b)
            if listed and s is not None:
                code = 1 if s > score_threshold else 0
            elif a in scores.db_genes and b in scores.db_genes:
                if (
                    replicate_corr is not None
                    and replicate_corr[i, j] > corr_threshold
                ):
                    code = 1
                else:
                    code = -1
            else:
                code = -1
            codes[i, j] = codes[j, i] = code
    np.fill_diagonal(codes, 1)
    return PriorAdjacency(list(gene_ids), codes)


def read_score_csv(path):
    """Rows of `gene_a,gene_b,score` with NA allowed in the score column."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, start=1):
            ln = ln.strip()
            if not ln:
                continue
            parts = [p.strip() for p in ln.split(",")]
            if lineno == 1 and parts[:2] == ["gene_a", "gene_b"]:
                continue
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected gene_a,gene_b,score")
            a, b, s = parts
            score = None if s.upper() == "NA" else float(s)
            rows.append((a, b, score))
    return rows


def read_gene_list(path) -> set[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return {ln.strip() for ln in fh if ln.strip()}


def read_dense_prior_csv(path) -> PriorAdjacency:
    """Dense format: header row of ids, first column of ids, cells {1,0,NA}."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty prior file")
    header = [h.strip() for h in lines[0].split(",")]
    ids = header[1:]
    n = len(ids)
    codes = np.full((n, n), -1, dtype=np.int8)
    if len(lines) - 1 != n:
        raise DataError(f"{path}: expected {n} data rows, got {len(lines) - 1}")
    for i, ln in enumerate(lines[1:]):
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) != n + 1:
            raise DataError(f"{path}: row {i + 2} has wrong field count")
        if parts[0] != ids[i]:
            raise DataError(f"{path}: row id {parts[0]!r} does not match header order")
        for j, cell in enumerate(parts[1:]):
            cell = cell.upper()
            if cell == "NA":
                codes[i, j] = -1
            elif cell in ("0", "1"):
                codes[i, j] = int(cell)
            else:
                raise DataError(f"{path}: illegal cell {cell!r} at row {i + 2}")
    if not np.array_equal(codes, codes.T):
        raise DataError(f"{path}: dense prior is not symmetric")
    return PriorAdjacency(ids, codes)


def write_dense_prior_csv(prior: PriorAdjacency, path) -> None:
    cell = {1: "1", 0: "0", -1: "NA"}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gene," + ",".join(prior.gene_ids) + "\n")
        for gid, row in zip(prior.gene_ids, prior.codes):
            fh.write(gid + "," + ",".join(cell[int(c)] for c in row) + "\n")


def read_dense_matrix_csv(path, expect_ids: list[str]) -> np.ndarray:
    """Dense real matrix with the same id header/column layout as the prior."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = [h.strip() for h in lines[0].split(",")]
    ids = header[1:]
    if ids != list(expect_ids):
        raise DataError(f"{path}: gene ids do not match expression matrix")
    n = len(ids)
    out = np.zeros((n, n))
    for i, ln in enumerate(lines[1:]):
        parts = ln.split(",")
        out[i] = [float(x) for x in parts[1:]]
    return out
