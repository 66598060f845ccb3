"""All-pairs sweep of the lead-lag metrics.

For every unordered pair (i, j) the sweep fits the full design in both
directions, the partner-only design once, and joins in the cached self-only
fit of each response, yielding a record of shrunken R-squared values, the g
that was used, the prior status, and a Bayes factor.  Pair similarity is the
max of the two directed values.

Splines and running integrals are computed once per series.  Pairs are
processed in fixed-size chunks through batched linear algebra; chunks may be
farmed out to worker processes, and every arithmetic step is per-pair, so
results are bit-identical for any worker count.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from . import timeseries as ts
from .prior import PriorAdjacency, Ternary
from .regress import (
    DEFAULT_A,
    DEFAULT_B,
    DEFAULT_P_COV,
    G_CAP,
    G_FLOOR,
    RANK_RCOND,
)
from .timeseries import DataError, ExpressionMatrix

CHUNK_PAIRS = 16384

# Reference percentiles reported for the original 17-point dataset, used as
# fallbacks when no data-driven threshold is requested: 95th percentile of
# the shrunken metric, 95th of the unshrunken metric, network cutoff.
BAYES_Q95_DEFAULT = 0.76
OLS_Q95_DEFAULT = 0.96
NETWORK_THRESHOLD_DEFAULT = 0.9

FLAG_NAMES = (
    "deg_i",
    "deg_j",
    "rank_ij",
    "rank_ji",
    "rank_other",
    "rank_own_i",
    "rank_own_j",
    "perfect_ij",
    "perfect_ji",
    "perfect_other",
    "xi_degenerate",
)
_FLAG_BIT = {name: 1 << k for k, name in enumerate(FLAG_NAMES)}

METRICS_COLUMNS = (
    "gene_i",
    "gene_j",
    "llr2_ij",
    "llr2_ji",
    "llr2_sym",
    "llr2_other",
    "llr2_own_i",
    "llr2_own_j",
    "diff_ij",
    "g_used",
    "w_status",
    "bf_log10",
    "flags",
)


@dataclass(frozen=True)
class PairwiseConfig:
    estimator: str = "bayes"  # "bayes" or "ols"
    adaptive_xi: bool = False
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    g_floor: float = G_FLOOR
    g_cap: float = G_CAP
    p_cov: int = DEFAULT_P_COV
    workers: int = 1

    def __post_init__(self):
        if self.estimator not in ("bayes", "ols"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")
        if not (0 < self.g_floor <= self.g_cap):
            raise ValueError("need 0 < g_floor <= g_cap")


@dataclass
class PairMetrics:
    i: int
    j: int
    llr2_ij: float
    llr2_ji: float
    llr2_sym: float
    llr2_other_ij: float
    llr2_own_i: float
    llr2_own_j: float
    diff_ij: float
    g_used: float
    w_status: Ternary
    bf_log10: float
    flags: tuple[str, ...]


@dataclass
class SimilarityMatrix:
    """Symmetric pair-similarity matrix with unit diagonal, entries in [0, 1]."""

    gene_ids: list[str]
    S: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.S, dtype=float)
        n = len(self.gene_ids)
        if s.shape != (n, n):
            raise DataError("similarity shape does not match gene ids")
        if not np.allclose(s, s.T, atol=1e-12):
            raise DataError("similarity matrix must be symmetric")
        if np.any(s < -1e-12) or np.any(s > 1 + 1e-12):
            raise DataError("similarity entries must lie in [0, 1]")
        s = np.clip((s + s.T) / 2.0, 0.0, 1.0)
        np.fill_diagonal(s, 1.0)
        self.S = s


@dataclass
class PairTable:
    """Column-oriented record of every unordered pair, i < j."""

    gene_ids: list[str]
    i_idx: np.ndarray
    j_idx: np.ndarray
    llr2_ij: np.ndarray
    llr2_ji: np.ndarray
    llr2_sym: np.ndarray
    llr2_other: np.ndarray
    llr2_own_i: np.ndarray
    llr2_own_j: np.ndarray
    diff_ij: np.ndarray
    g_used: np.ndarray
    w_code: np.ndarray
    bf_log10: np.ndarray
    flag_bits: np.ndarray

    def __len__(self) -> int:
        return self.i_idx.size

    def flags_of(self, row: int) -> tuple[str, ...]:
        bits = int(self.flag_bits[row])
        return tuple(name for name in FLAG_NAMES if bits & _FLAG_BIT[name])

    def record(self, row: int) -> PairMetrics:
        return PairMetrics(
            i=int(self.i_idx[row]),
            j=int(self.j_idx[row]),
            llr2_ij=float(self.llr2_ij[row]),
            llr2_ji=float(self.llr2_ji[row]),
            llr2_sym=float(self.llr2_sym[row]),
            llr2_other_ij=float(self.llr2_other[row]),
            llr2_own_i=float(self.llr2_own_i[row]),
            llr2_own_j=float(self.llr2_own_j[row]),
            diff_ij=float(self.diff_ij[row]),
            g_used=float(self.g_used[row]),
            w_status={1: Ternary.ONE, 0: Ternary.ZERO, -1: Ternary.NA}[
                int(self.w_code[row])
            ],
            bf_log10=float(self.bf_log10[row]),
            flags=self.flags_of(row),
        )


def symmetrize(llr2_ij: float, llr2_ji: float) -> float:
    """Pair similarity is the larger of the two directed values."""
    return max(llr2_ij, llr2_ji)


def percentile_threshold(values, q: float) -> float:
    """Order-statistic percentile with linear interpolation between ranks."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("cannot take a percentile of no values")
    if not (0.0 < q < 1.0):
        raise ValueError("q must lie in (0, 1)")
    return float(np.quantile(v, q, method="linear"))


def precompute_integrals(matrix: ExpressionMatrix) -> np.ndarray:
    """Running integral of each series' spline, one fit per series."""
    out = np.empty_like(matrix.values)
    for k in range(matrix.n_genes):
        spline = ts.fit_spline(matrix.values[k], matrix.grid)
        out[k] = ts.cumulative_integral(spline)
    return out


# ---------------------------------------------------------------------------
# Batched fitting kernels.  Shapes: m pairs, n time points, p columns.
# ---------------------------------------------------------------------------


def _batched_ols(X: np.ndarray, Y: np.ndarray):
    """Minimum-norm least squares for a stack of small designs.

    Returns (fitted, sigma2, rank_deficient).  sigma2 divides by (n - p)
    with p the column count, matching the single-pair path.
    """
    m, n, p = X.shape
    u, s, _ = np.linalg.svd(X, full_matrices=False)
    keep = s > (RANK_RCOND * s[:, :1])
    c = np.einsum("mnp,mn->mp", u, Y)
    fitted = np.einsum("mnp,mp->mn", u, np.where(keep, c, 0.0))
    rss = np.sum((Y - fitted) ** 2, axis=1)
    sigma2 = rss / (n - p)
    return fitted, sigma2, keep.sum(axis=1) < p


def _variance_ratio(fitted: np.ndarray, Y: np.ndarray) -> np.ndarray:
    vf = fitted.var(axis=1, ddof=1)
    vr = (Y - fitted).var(axis=1, ddof=1)
    denom = vf + vr
    return np.where(denom > 0, vf / np.where(denom > 0, denom, 1.0), 0.0)


def _classic_r2(fitted: np.ndarray, Y: np.ndarray) -> np.ndarray:
    ybar = Y.mean(axis=1, keepdims=True)
    sst = np.sum((Y - ybar) ** 2, axis=1)
    ssr = np.sum((fitted - ybar) ** 2, axis=1)
    return np.where(sst > 0, ssr / np.where(sst > 0, sst, 1.0), 0.0)


def _directed_fit(
    resp_vals: np.ndarray,
    part_vals: np.ndarray,
    resp_int: np.ndarray,
    part_int: np.ndarray,
    t: np.ndarray,
    w: np.ndarray,
    cfg: PairwiseConfig,
    variant: str,
):
    """Fit one direction (response on partner) for a stack of pairs.

    variant "full" uses [partner, int(partner), int(self), t, 1]; "other"
    uses [partner, int(partner), 1].  Returns the shrunken R2, the g used,
    the unshrunken (classic) R2, and flag arrays.
    """
    m, n = resp_vals.shape
    ones = np.broadcast_to(np.ones(n), (m, n))
    tt = np.broadcast_to(t, (m, n))
    if variant == "full":
        X = np.stack([part_vals, part_int, resp_int, tt, ones], axis=2)
    else:
        X = np.stack([part_vals, part_int, ones], axis=2)
    p = X.shape[2]
    Y = resp_vals
    fitted_ols, sigma2, rankdef = _batched_ols(X, Y)
    r2_cls = _classic_r2(fitted_ols, Y)
    degenerate = Y.var(axis=1) == 0.0

    if cfg.estimator == "ols":
        llr2 = _variance_ratio(fitted_ols, Y)
        llr2[degenerate] = 0.0
        g = np.full(m, np.nan)
        return llr2, g, r2_cls, rankdef, np.zeros(m, bool), degenerate, np.zeros(m, bool)

    # Prior fitted values: unit mass (or the adaptive projection) on the two
    # partner columns for associated pairs, zero otherwise.
    x12 = part_vals + part_int
    assoc = w == 1
    xi_degenerate = np.zeros(m, dtype=bool)
    if cfg.adaptive_xi and variant == "full":
        x12_norm2 = np.sum(x12 * x12, axis=1)
        bad = assoc & (x12_norm2 == 0.0)
        xi_degenerate |= bad
        xi = np.where(
            x12_norm2 > 0,
            np.sum(Y * x12, axis=1) / np.where(x12_norm2 > 0, x12_norm2, 1.0),
            0.0,
        )
        weight = np.where(assoc, xi, 0.0)
    else:
        weight = assoc.astype(float)
    y0 = weight[:, None] * x12

    perfect = sigma2 <= 1e-24 * np.maximum(
        np.mean(Y * Y, axis=1), np.finfo(float).tiny
    )
    dist2 = np.sum((fitted_ols - y0) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        unclamped = dist2 / (p * sigma2) - 1.0
    g = np.clip(np.nan_to_num(unclamped, nan=cfg.g_cap), cfg.g_floor, cfg.g_cap)
    g[perfect] = cfg.g_cap
    g[w == 0] = 1.0

    fitted_star = (y0 + g[:, None] * fitted_ols) / (1.0 + g[:, None])
    llr2 = _variance_ratio(fitted_star, Y)
    llr2[degenerate] = 0.0
    return llr2, g, r2_cls, rankdef, perfect & ~degenerate, degenerate, xi_degenerate


def _own_fit(values: np.ndarray, integrals: np.ndarray, t: np.ndarray, cfg: PairwiseConfig):
    """Self-only fit for every series: design [int(self), t, 1], zero prior."""
    n_genes, n = values.shape
    ones = np.broadcast_to(np.ones(n), (n_genes, n))
    tt = np.broadcast_to(t, (n_genes, n))
    X = np.stack([integrals, tt, ones], axis=2)
    Y = values
    fitted_ols, sigma2, rankdef = _batched_ols(X, Y)
    degenerate = Y.var(axis=1) == 0.0
    if cfg.estimator == "ols":
        llr2 = _variance_ratio(fitted_ols, Y)
        llr2[degenerate] = 0.0
        return llr2, rankdef, degenerate
    perfect = sigma2 <= 1e-24 * np.maximum(
        np.mean(Y * Y, axis=1), np.finfo(float).tiny
    )
    dist2 = np.sum(fitted_ols**2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        unclamped = dist2 / (3 * sigma2) - 1.0
    g = np.clip(np.nan_to_num(unclamped, nan=cfg.g_cap), cfg.g_floor, cfg.g_cap)
    g[perfect] = cfg.g_cap
    fitted_star = g[:, None] * fitted_ols / (1.0 + g[:, None])
    llr2 = _variance_ratio(fitted_star, Y)
    llr2[degenerate] = 0.0
    return llr2, rankdef, degenerate


def _chunk_kernel(
    I: np.ndarray,
    J: np.ndarray,
    values: np.ndarray,
    integrals: np.ndarray,
    t: np.ndarray,
    w_codes: np.ndarray,
    cfg: PairwiseConfig,
):
    """All per-pair quantities for a chunk of unordered pairs."""
    n = t.size
    w = w_codes[I, J].astype(np.int8)
    vi, vj = values[I], values[J]
    qi, qj = integrals[I], integrals[J]

    llr2_ij, g_ij, r2cls_ij, rk_ij, pf_ij, deg_i, xi_ij = _directed_fit(
        vi, vj, qi, qj, t, w, cfg, "full"
    )
    llr2_ji, _, _, rk_ji, pf_ji, deg_j, _ = _directed_fit(
        vj, vi, qj, qi, t, w, cfg, "full"
    )
    llr2_other, _, _, rk_ot, pf_ot, _, _ = _directed_fit(
        vi, vj, qi, qj, t, w, cfg, "other"
    )

    if cfg.estimator == "ols":
        bf = np.full(I.size, np.nan)
    else:
        r2c = np.clip(r2cls_ij, 0.0, 1.0)
        bf = 0.5 * (n - cfg.p_cov - 1) * np.log10(1.0 + g_ij) - 0.5 * (
            n - 1
        ) * np.log10(1.0 + g_ij * (1.0 - r2c))

    bits = (
        deg_i * _FLAG_BIT["deg_i"]
        + deg_j * _FLAG_BIT["deg_j"]
        + rk_ij * _FLAG_BIT["rank_ij"]
        + rk_ji * _FLAG_BIT["rank_ji"]
        + rk_ot * _FLAG_BIT["rank_other"]
        + pf_ij * _FLAG_BIT["perfect_ij"]
        + pf_ji * _FLAG_BIT["perfect_ji"]
        + pf_ot * _FLAG_BIT["perfect_other"]
        + xi_ij * _FLAG_BIT["xi_degenerate"]
    ).astype(np.uint32)
    return {
        "llr2_ij": llr2_ij,
        "llr2_ji": llr2_ji,
        "llr2_other": llr2_other,
        "g_used": g_ij,
        "bf_log10": bf,
        "flag_bits": bits,
        "w_code": w,
    }


# Worker-process state for the parallel sweep.
_WORKER: dict = {}


def _init_worker(values, integrals, t, w_codes, cfg):
    _WORKER["args"] = (values, integrals, t, w_codes, cfg)


def _run_chunk(span):
    start, stop, I, J = span
    values, integrals, t, w_codes, cfg = _WORKER["args"]
    return start, _chunk_kernel(I, J, values, integrals, t, w_codes, cfg)


def compute_pair(
    i: int,
    j: int,
    matrix: ExpressionMatrix,
    integrals: np.ndarray,
    prior: PriorAdjacency,
    cfg: PairwiseConfig = PairwiseConfig(),
) -> PairMetrics:
    """Metrics for one unordered pair; same kernel as the full sweep."""
    if i == j:
        raise ValueError("pair indices must differ")
    i, j = (i, j) if i < j else (j, i)
    I = np.array([i])
    J = np.array([j])
    out = _chunk_kernel(
        I, J, matrix.values, integrals, matrix.grid.times, prior.codes, cfg
    )
    own_llr2, own_rank, own_deg = _own_fit(
        matrix.values[[i, j]], integrals[[i, j]], matrix.grid.times, cfg
    )
    bits = int(out["flag_bits"][0])
    bits |= int(own_rank[0]) * _FLAG_BIT["rank_own_i"]
    bits |= int(own_rank[1]) * _FLAG_BIT["rank_own_j"]
    table = PairTable(
        gene_ids=matrix.gene_ids,
        i_idx=I.astype(np.int32),
        j_idx=J.astype(np.int32),
        llr2_ij=out["llr2_ij"],
        llr2_ji=out["llr2_ji"],
        llr2_sym=np.maximum(out["llr2_ij"], out["llr2_ji"]),
        llr2_other=out["llr2_other"],
        llr2_own_i=own_llr2[[0]],
        llr2_own_j=own_llr2[[1]],
        diff_ij=out["llr2_ij"] - own_llr2[[0]],
        g_used=out["g_used"],
        w_code=out["w_code"],
        bf_log10=out["bf_log10"],
        flag_bits=np.array([bits], dtype=np.uint32),
    )
    return table.record(0)


def compute_all(
    matrix: ExpressionMatrix,
    prior: PriorAdjacency,
    cfg: PairwiseConfig = PairwiseConfig(),
) -> tuple[SimilarityMatrix, PairTable]:
    """Evaluate every unordered pair and assemble the similarity matrix.

    Integrals are precomputed once per series.  The sweep never aborts on a
    degenerate pair; per-pair flags carry the diagnosis instead.
    """
    if prior.gene_ids != matrix.gene_ids:
        raise DataError("prior gene ids do not match expression matrix")
    n_genes = matrix.n_genes
    t = matrix.grid.times
    integrals = precompute_integrals(matrix)
    own_llr2, own_rank, _ = _own_fit(matrix.values, integrals, t, cfg)

    I, J = np.triu_indices(n_genes, k=1)
    I = I.astype(np.int32)
    J = J.astype(np.int32)
    m = I.size
    cols = {
        "llr2_ij": np.empty(m),
        "llr2_ji": np.empty(m),
        "llr2_other": np.empty(m),
        "g_used": np.empty(m),
        "bf_log10": np.empty(m),
        "flag_bits": np.empty(m, dtype=np.uint32),
        "w_code": np.empty(m, dtype=np.int8),
    }
    spans = [
        (s, min(s + CHUNK_PAIRS, m), I[s : s + CHUNK_PAIRS], J[s : s + CHUNK_PAIRS])
        for s in range(0, m, CHUNK_PAIRS)
    ]
    if cfg.workers == 1 or len(spans) <= 1:
        _init_worker(matrix.values, integrals, t, prior.codes, cfg)
        results = map(_run_chunk, spans)
        for start, out in results:
            stop = start + out["llr2_ij"].size
            for key, arr in out.items():
                cols[key][start:stop] = arr
        _WORKER.clear()
    else:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=cfg.workers,
            initializer=_init_worker,
            initargs=(matrix.values, integrals, t, prior.codes, cfg),
        ) as pool:
            for start, out in pool.map(_run_chunk, spans):
                stop = start + out["llr2_ij"].size
                for key, arr in out.items():
                    cols[key][start:stop] = arr

    flag_bits = cols["flag_bits"].astype(np.uint32)
    flag_bits |= np.where(own_rank[I], _FLAG_BIT["rank_own_i"], 0).astype(np.uint32)
    flag_bits |= np.where(own_rank[J], _FLAG_BIT["rank_own_j"], 0).astype(np.uint32)

    table = PairTable(
        gene_ids=matrix.gene_ids,
        i_idx=I,
        j_idx=J,
        llr2_ij=cols["llr2_ij"],
        llr2_ji=cols["llr2_ji"],
        llr2_sym=np.maximum(cols["llr2_ij"], cols["llr2_ji"]),
        llr2_other=cols["llr2_other"],
        llr2_own_i=own_llr2[I],
        llr2_own_j=own_llr2[J],
        diff_ij=cols["llr2_ij"] - own_llr2[I],
        g_used=cols["g_used"],
        w_code=cols["w_code"],
        bf_log10=cols["bf_log10"],
        flag_bits=flag_bits,
    )
    S = np.zeros((n_genes, n_genes))
    S[I, J] = table.llr2_sym
    S[J, I] = table.llr2_sym
    np.fill_diagonal(S, 1.0)
    return SimilarityMatrix(matrix.gene_ids, S), table


# ---------------------------------------------------------------------------
# Delimited output.
# ---------------------------------------------------------------------------

_W_TEXT = {1: "1", 0: "0", -1: "NA"}


def write_metrics_tsv(table: PairTable, path) -> None:
    ids = table.gene_ids
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(METRICS_COLUMNS) + "\n")
        for r in range(len(table)):
            bits = int(table.flag_bits[r])
            flags = (
                ";".join(n for n in FLAG_NAMES if bits & _FLAG_BIT[n]) if bits else ""
            )
            fh.write(
                "\t".join(
                    (
                        ids[table.i_idx[r]],
                        ids[table.j_idx[r]],
                        f"{table.llr2_ij[r]:.17g}",
                        f"{table.llr2_ji[r]:.17g}",
                        f"{table.llr2_sym[r]:.17g}",
                        f"{table.llr2_other[r]:.17g}",
                        f"{table.llr2_own_i[r]:.17g}",
                        f"{table.llr2_own_j[r]:.17g}",
                        f"{table.diff_ij[r]:.17g}",
                        f"{table.g_used[r]:.17g}",
                        _W_TEXT[int(table.w_code[r])],
                        f"{table.bf_log10[r]:.17g}",
                        flags,
                    )
                )
                + "\n"
            )


def write_similarity_csv(sim: SimilarityMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gene," + ",".join(sim.gene_ids) + "\n")
        for gid, row in zip(sim.gene_ids, sim.S):
            fh.write(gid + "," + ",".join(f"{x:.17g}" for x in row) + "\n")


def read_similarity_csv(path) -> SimilarityMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    ids = [h.strip() for h in lines[0].split(",")[1:]]
    n = len(ids)
    S = np.zeros((n, n))
    if len(lines) - 1 != n:
        raise DataError(f"{path}: expected {n} rows, got {len(lines) - 1}")
    for k, ln in enumerate(lines[1:]):
        parts = ln.split(",")
        if parts[0].strip() != ids[k]:
            raise DataError(f"{path}: row order does not match header")
        S[k] = [float(x) for x in parts[1:]]
    return SimilarityMatrix(ids, S)
