"""Thresholded association networks over the similarity matrix.

Edges connect pairs whose similarity strictly exceeds the threshold and are
classed against the prior adjacency: known (prior ONE), novel (prior NA),
unlikely (prior ZERO).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pairwise import SimilarityMatrix
from .prior import PriorAdjacency, Ternary

EDGE_CLASSES = ("known", "novel", "unlikely")
_CLASS_OF = {Ternary.ONE: "known", Ternary.NA: "novel", Ternary.ZERO: "unlikely"}


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    weight: float
    edge_class: str


@dataclass
class GeneNetwork:
    nodes: list[str]
    edges: list[Edge]
    threshold: float

    def neighbors(self, gene: str) -> set[str]:
        out = set()
        for e in self.edges:
            if e.a == gene:
                out.add(e.b)
            elif e.b == gene:
                out.add(e.a)
        return out


def build_network(
    S: SimilarityMatrix,
    W: PriorAdjacency,
    threshold: float = 0.9,
) -> GeneNetwork:
    """Edges where similarity > threshold (strict), in (i < j) id order."""
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must lie in (0, 1)")
    if W.gene_ids != S.gene_ids:
        raise ValueError("prior gene ids do not match similarity matrix")
    ids = S.gene_ids
    edges = []
    I, J = np.triu_indices(len(ids), k=1)
    above = S.S[I, J] > threshold
    for i, j in zip(I[above], J[above]):
        w = W.lookup(int(i), int(j))
        edges.append(Edge(ids[i], ids[j], float(S.S[i, j]), _CLASS_OF[w]))
    return GeneNetwork(list(ids), edges, threshold)


def neighborhood(net: GeneNetwork, seeds) -> GeneNetwork:
    """Induced subnetwork on the seeds plus their direct neighbors."""
    seeds = set(seeds)
    unknown = seeds - set(net.nodes)
    if unknown:
        raise KeyError(f"unknown seed ids: {sorted(unknown)}")
    keep = set(seeds)
    for e in net.edges:
        if e.a in seeds:
            keep.add(e.b)
        if e.b in seeds:
            keep.add(e.a)
    nodes = [g for g in net.nodes if g in keep]
    edges = [e for e in net.edges if e.a in keep and e.b in keep]
    return GeneNetwork(nodes, edges, net.threshold)


def degree_report(net: GeneNetwork) -> list[tuple[str, int]]:
    """(gene, degree) rows sorted by degree descending, then id."""
    deg = {g: 0 for g in net.nodes}
    for e in net.edges:
        deg[e.a] += 1
        deg[e.b] += 1
    return sorted(deg.items(), key=lambda kv: (-kv[1], kv[0]))


def write_edge_tsv(net: GeneNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gene_a\tgene_b\tweight\tclass\n")
        for e in net.edges:
            fh.write(f"{e.a}\t{e.b}\t{e.weight:.17g}\t{e.edge_class}\n")


def read_edge_tsv(path, nodes: list[str] | None = None, threshold: float = 0.9) -> GeneNetwork:
    edges = []
    seen = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "gene_a\tgene_b\tweight\tclass":
            raise ValueError(f"{path}: unexpected edge header")
        for ln in fh:
            ln = ln.rstrip("\n")
            if not ln:
                continue
            a, b, w, cls = ln.split("\t")
            edges.append(Edge(a, b, float(w), cls))
            seen.extend((a, b))
    if nodes is None:
        nodes = sorted(set(seen))
    return GeneNetwork(list(nodes), edges, threshold)


def write_dot(net: GeneNetwork, path) -> None:
    """Graphviz DOT emission; edge color tracks the class."""
    color = {"known": "red", "novel": "blue", "unlikely": "gray"}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("graph association {\n")
        for g in net.nodes:
            fh.write(f'  "{g}";\n')
        for e in net.edges:
            fh.write(
                f'  "{e.a}" -- "{e.b}" [color={color[e.edge_class]}, '
                f'weight="{e.weight:.3f}"];\n'
            )
        fh.write("}\n")


def write_degree_csv(net: GeneNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gene,degree\n")
        for gene, deg in degree_report(net):
            fh.write(f"{gene},{deg}\n")
