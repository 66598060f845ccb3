"""Agglomerative Ward clustering on a pair-dissimilarity matrix.

Similarities S turn into distances J - S (J the all-ones matrix).  Merges
follow the Lance-Williams recurrence for Ward's criterion.  Two height
conventions circulate in standard toolchains; the default here squares the
input dissimilarities and reports merge heights on that squared scale, and
`square_input=False` feeds the raw dissimilarities to the recurrence
instead.  Ties break on the lexicographically smallest node-id pair, so the
merge sequence is deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .pairwise import SimilarityMatrix
from .timeseries import DataError


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass
class Dendrogram:
    """Merge history: leaves are nodes 0..N-1, merge m creates node N+m."""

    n_leaves: int
    merges: list[Merge]
    gene_ids: list[str] | None = None

    def __post_init__(self):
        if len(self.merges) != self.n_leaves - 1:
            raise ValueError("a dendrogram over N leaves has exactly N-1 merges")

    @property
    def max_height(self) -> float:
        return max(m.height for m in self.merges) if self.merges else 0.0


def ward_linkage(D: np.ndarray, square_input: bool = True) -> Dendrogram:
    """Ward agglomeration of a symmetric dissimilarity matrix."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.shape != (n, n) or not np.allclose(D, D.T, atol=1e-12):
        raise DataError("dissimilarity matrix must be square and symmetric")
    if n < 2:
        raise DataError("need at least two items to cluster")

    work = (D * D) if square_input else D.copy()
    work = (work + work.T) / 2.0
    np.fill_diagonal(work, np.inf)
    ids = np.arange(n)
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    merges: list[Merge] = []

    for step in range(n - 1):
        masked = np.where(np.outer(active, active), work, np.inf)
        np.fill_diagonal(masked, np.inf)
        height = masked.min()
        cand = np.argwhere(masked == height)
        cand = cand[cand[:, 0] < cand[:, 1]]
        # lexicographically smallest (id, id) pair
        pair_ids = np.sort(ids[cand], axis=1)
        order = np.lexsort((pair_ids[:, 1], pair_ids[:, 0]))
        sa, sb = cand[order[0]]
        ida, idb = sorted((int(ids[sa]), int(ids[sb])))

        na, nb = sizes[sa], sizes[sb]
        merges.append(Merge(ida, idb, float(height), int(na + nb)))

        others = active.copy()
        others[[sa, sb]] = False
        nk = sizes[others]
        dak = work[sa, others]
        dbk = work[sb, others]
        work[sa, others] = ((na + nk) * dak + (nb + nk) * dbk - nk * height) / (
            na + nb + nk
        )
        work[others, sa] = work[sa, others]
        active[sb] = False
        ids[sa] = n + step
        sizes[sa] = na + nb
    return Dendrogram(n, merges)


def ward_cluster(S: SimilarityMatrix, square_input: bool = True) -> Dendrogram:
    """Cluster a similarity matrix via the distance matrix J - S."""
    D = 1.0 - S.S
    np.fill_diagonal(D, 0.0)
    dend = ward_linkage(D, square_input=square_input)
    dend.gene_ids = list(S.gene_ids)
    return dend


@dataclass
class ClusterAssignment:
    """gene id -> 1-based contiguous cluster label."""

    labels: dict[str, int]

    @property
    def n_clusters(self) -> int:
        return max(self.labels.values()) if self.labels else 0

    def members(self, label: int) -> list[str]:
        return [g for g, lab in self.labels.items() if lab == label]

    def partition(self) -> list[frozenset]:
        out: dict[int, set] = {}
        for g, lab in self.labels.items():
            out.setdefault(lab, set()).add(g)
        return [frozenset(s) for s in out.values()]


def cut(
    dend: Dendrogram,
    height: float | None = None,
    k: int | None = None,
) -> ClusterAssignment:
    """Cut the dendrogram by height (merges strictly below) or cluster count."""
    if (height is None) == (k is None):
        raise ValueError("specify exactly one of height or k")
    n = dend.n_leaves
    if k is not None:
        if not (1 <= k <= n):
            raise ValueError(f"k must lie in [1, {n}]")
        applied = set(range(n - k))
    else:
        if height < 0:
            raise ValueError("height must be nonnegative")
        applied = {s for s, m in enumerate(dend.merges) if m.height < height}

    parent = list(range(2 * n - 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step, merge in enumerate(dend.merges):
        node = n + step
        if step in applied:
            parent[find(merge.left)] = node
            parent[find(merge.right)] = node

    roots: dict[int, int] = {}
    gene_ids = dend.gene_ids or [str(i) for i in range(n)]
    labels: dict[str, int] = {}
    for leaf in range(n):
        root = find(leaf)
        if root not in roots:
            roots[root] = len(roots) + 1
        labels[gene_ids[leaf]] = roots[root]
    return ClusterAssignment(labels)


def write_dendrogram_json(dend: Dendrogram, path) -> None:
    payload = {
        "n_leaves": dend.n_leaves,
        "gene_ids": dend.gene_ids,
        "merges": [
            {"left": m.left, "right": m.right, "height": m.height, "size": m.size}
            for m in dend.merges
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_dendrogram_json(path) -> Dendrogram:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    merges = [
        Merge(m["left"], m["right"], m["height"], m["size"])
        for m in payload["merges"]
    ]
    return Dendrogram(payload["n_leaves"], merges, payload.get("gene_ids"))


def write_cluster_csv(assignment: ClusterAssignment, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gene,cluster\n")
        for gene, label in assignment.labels.items():
            fh.write(f"{gene},{label}\n")


def read_cluster_csv(path) -> ClusterAssignment:
    labels: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, start=1):
            ln = ln.strip()
            if not ln or (lineno == 1 and ln == "gene,cluster"):
                continue
            gene, label = ln.split(",")
            labels[gene] = int(label)
    return ClusterAssignment(labels)
