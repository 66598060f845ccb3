"""Time-series ingestion, spline interpolation, and baseline similarity.

Expression data lives in an :class:`ExpressionMatrix`: N series sampled on a
shared, strictly increasing time grid.  Each series gets a not-a-knot cubic
spline interpolant whose running integral (taken from the first grid point)
feeds the regression design downstream.  The module also carries two simple
baselines: a max-absolute-value filter and the Pearson correlation matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

MIN_POINTS = 4


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sampling times, in hours."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1:
            raise DataError("time grid must be one-dimensional")
        if t.size < MIN_POINTS:
            raise DataError(f"need at least {MIN_POINTS} time points, got {t.size}")
        if not np.all(np.isfinite(t)):
            raise DataError("non-finite time point")
        if np.any(np.diff(t) <= 0):
            raise DataError("time points must be strictly increasing")
        object.__setattr__(self, "times", t)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])


@dataclass
class ExpressionMatrix:
    """N series of n samples on a shared grid, log2 fold-change units."""

    gene_ids: list[str]
    values: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataError("values must be a 2-D matrix")
        if len(self.gene_ids) != v.shape[0]:
            raise DataError("gene id count does not match row count")
        if len(set(self.gene_ids)) != len(self.gene_ids):
            raise DataError("duplicate gene ids")
        if len(self.gene_ids) < 2:
            raise DataError("need at least 2 series")
        if v.shape[1] != self.grid.n:
            raise DataError("column count does not match time grid")
        if not np.all(np.isfinite(v)):
            raise DataError("missing or non-finite expression value")
        self.values = v

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    def index_of(self, gene_id: str) -> int:
        try:
            return self.gene_ids.index(gene_id)
        except ValueError:
            raise KeyError(f"unknown gene id {gene_id!r}") from None

    def constant_rows(self) -> list[int]:
        """Indices of rows with zero sample variance (flagged downstream)."""
        v = self.values
        return [i for i in range(v.shape[0]) if np.all(v[i] == v[i, 0])]


@dataclass(frozen=True)
class SplineInterpolant:
    """Piecewise-cubic interpolant through every sample (not-a-knot ends)."""

    knots: TimeGrid
    _cs: CubicSpline = field(repr=False)

    def __call__(self, t):
        return self._cs(t)

    @property
    def coefficients(self) -> np.ndarray:
        """Per-interval cubic coefficients, highest order first, shape (4, n-1)."""
        return self._cs.c

    def antiderivative(self):
        return self._cs.antiderivative()


def fit_spline(values: np.ndarray, grid: TimeGrid) -> SplineInterpolant:
    """Fit a not-a-knot cubic spline through (grid.times, values).

    Not-a-knot reproduces cubic polynomials exactly, so both the interpolant
    and its running integral admit machine-precision oracles.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size != grid.n:
        raise DataError("values length does not match grid")
    if not np.all(np.isfinite(v)):
        raise DataError("non-finite value passed to spline fit")
    return SplineInterpolant(grid, CubicSpline(grid.times, v, bc_type="not-a-knot"))


def cumulative_integral(spline: SplineInterpolant) -> np.ndarray:
    """Integral of the spline from the first knot up to each knot.

    Evaluated through the closed-form piecewise antiderivative, not
    quadrature; the first entry is exactly 0.
    """
    t = spline.knots.times
    anti = spline.antiderivative()
    out = anti(t) - anti(t[0])
    out[0] = 0.0
    return out


def fold_change_filter(matrix: ExpressionMatrix, threshold: float) -> list[str]:
    """Ids of series whose max absolute value reaches `threshold` (inclusive)."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    keep = np.max(np.abs(matrix.values), axis=1) >= threshold
    return [g for g, k in zip(matrix.gene_ids, keep) if k]


def pearson_similarity(matrix: ExpressionMatrix) -> tuple[np.ndarray, list[int]]:
    """Pearson correlation between all row pairs.

    Returns the N x N correlation matrix (unit diagonal) and the indices of
    constant rows, whose off-diagonal correlations are defined as 0.
    """
    v = matrix.values
    n_genes = v.shape[0]
    const = matrix.constant_rows()
    sd = v.std(axis=1)
    safe = sd > 0
    r = np.zeros((n_genes, n_genes))
    if safe.any():
        sub = np.corrcoef(v[safe])
        idx = np.where(safe)[0]
        r[np.ix_(idx, idx)] = sub
    np.fill_diagonal(r, 1.0)
    # corrcoef can exceed [-1, 1] by rounding
    return np.clip(r, -1.0, 1.0), const


def read_expression_csv(path) -> ExpressionMatrix:
    """Parse the `gene,<t1>,<t2>,...` expression format.

    Column headers after the first are the numeric time points.  Missing
    cells and NA tokens are rejected.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty expression file")
    header = lines[0].split(",")
    if len(header) < 2 or header[0].strip().lower() != "gene":
        raise DataError(f"{path}: expected header 'gene,<t1:>,...'")
    try:
        times = np.array([float(h) for h in header[1:]])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric time in header: {exc}") from None
    grid = TimeGrid(times)
    ids: list[str] = []
    rows: list[list[float]] = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
        ids.append(parts[0].strip())
        try:
            row = [float(x) for x in parts[1:]]
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric or NA value") from None
        if not all(math.isfinite(x) for x in row):
            raise DataError(f"{path}:{lineno}: non-finite value")
        rows.append(row)
    return ExpressionMatrix(ids, np.array(rows), grid)


def write_expression_csv(matrix: ExpressionMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gene," + ",".join(f"{t:.17g}" for t in matrix.grid.times) + "\n")
        for gid, row in zip(matrix.gene_ids, matrix.values):
            fh.write(gid + "," + ",".join(f"{x:.17g}" for x in row) + "\n")
