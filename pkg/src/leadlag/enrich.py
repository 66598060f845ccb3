"""Hypergeometric over-representation tests with Benjamini-Hochberg control.

Annotation terms are flat gene sets inside a fixed universe.  Each
(cluster, term) cell gets an upper-tail hypergeometric p-value, adjusted
per cluster across that cluster's tested terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cluster import ClusterAssignment
from .timeseries import DataError


@dataclass
class AnnotationSets:
    """term id -> gene set, all contained in the universe."""

    terms: dict[str, frozenset]
    universe: frozenset

    def __post_init__(self):
        for term, genes in self.terms.items():
            if not genes <= self.universe:
                raise DataError(f"term {term!r} has genes outside the universe")

    @classmethod
    def from_rows(cls, rows, universe) -> "AnnotationSets":
        """Build from (term, gene) rows, dropping genes outside the universe."""
        universe = frozenset(universe)
        by_term: dict[str, set] = {}
        for term, gene in rows:
            if gene in universe:
                by_term.setdefault(term, set()).add(gene)
        return cls({t: frozenset(g) for t, g in by_term.items()}, universe)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def hypergeom_test(cluster, term, universe) -> float:
    """Upper-tail probability of drawing at least the observed overlap.

    Population = |universe|, successes = |term|, draws = |cluster|,
    observed = |cluster & term|.  The pmf terms are summed in log space via
    log-gamma, so large populations cannot overflow.
    """
    cluster = set(cluster)
    term = set(term)
    universe = set(universe)
    if not universe:
        raise ValueError("universe must be nonempty")
    if not cluster <= universe or not term <= universe:
        raise ValueError("cluster and term must be subsets of the universe")
    M = len(universe)
    K = len(term)
    n_draw = len(cluster)
    k_obs = len(cluster & term)
    if k_obs == 0:
        return 1.0
    hi = min(K, n_draw)
    log_denom = _log_comb(M, n_draw)
    total = 0.0
    for k in range(k_obs, hi + 1):
        if n_draw - k > M - K:
            continue
        total += math.exp(_log_comb(K, k) + _log_comb(M - K, n_draw - k) - log_denom)
    return min(total, 1.0)


def bh_adjust(pvals) -> np.ndarray:
    """Benjamini-Hochberg step-up adjustment, returned in input order."""
    p = np.asarray(pvals, dtype=float)
    if p.size == 0:
        return p.copy()
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.minimum(adjusted, 1.0)
    out = np.empty(m)
    out[order] = adjusted
    return out


@dataclass(frozen=True)
class EnrichmentRow:
    cluster: int
    term: str
    overlap: int
    term_size: int
    cluster_size: int
    universe_size: int
    pval: float
    padj: float
    significant: bool


def enrich_clusters(
    assignment: ClusterAssignment,
    annotations: AnnotationSets,
    alpha: float = 0.05,
) -> list[EnrichmentRow]:
    """Test every (cluster, term) cell; adjustment pooled per cluster.

    Rows come back sorted by adjusted p ascending (ties by cluster, term).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    genes = set(assignment.labels)
    if not genes <= annotations.universe:
        raise DataError("cluster assignment contains genes outside the universe")
    universe = annotations.universe
    term_ids = sorted(annotations.terms)
    rows: list[EnrichmentRow] = []
    for label in sorted(set(assignment.labels.values())):
        members = set(assignment.members(label))
        pvals = [
            hypergeom_test(members, annotations.terms[t], universe) for t in term_ids
        ]
        padj = bh_adjust(pvals)
        for t, p, q in zip(term_ids, pvals, padj):
            term_genes = annotations.terms[t]
            rows.append(
                EnrichmentRow(
                    cluster=label,
                    term=t,
                    overlap=len(members & term_genes),
                    term_size=len(term_genes),
                    cluster_size=len(members),
                    universe_size=len(universe),
                    pval=float(p),
                    padj=float(q),
                    significant=bool(q < alpha),
                )
            )
    rows.sort(key=lambda r: (r.padj, r.cluster, r.term))
    return rows


def read_annotation_tsv(path, universe) -> AnnotationSets:
    """Two-column `term<TAB>gene` rows, one per membership."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, start=1):
            ln = ln.rstrip("\n")
            if not ln:
                continue
            parts = ln.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected term<TAB>gene")
            if lineno == 1 and parts == ["term", "gene"]:
                continue
            rows.append((parts[0], parts[1]))
    return AnnotationSets.from_rows(rows, universe)


def write_enrichment_csv(rows: list[EnrichmentRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "cluster,term,k,term_size,cluster_size,universe_size,pval,padj,significant\n"
        )
        for r in rows:
            fh.write(
                f"{r.cluster},{r.term},{r.overlap},{r.term_size},{r.cluster_size},"
                f"{r.universe_size},{r.pval:.17g},{r.padj:.17g},"
                f"{str(r.significant).lower()}\n"
            )
