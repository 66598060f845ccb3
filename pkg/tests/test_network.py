import numpy as np
import pytest

from leadlag.network import (
    build_network,
    degree_report,
    neighborhood,
    read_edge_tsv,
    write_degree_csv,
    write_dot,
    write_edge_tsv,
)
from leadlag.pairwise import SimilarityMatrix
from leadlag.prior import PriorAdjacency


def make_sim(ids, entries):
    n = len(ids)
    S = np.zeros((n, n))
    np.fill_diagonal(S, 1.0)
    for (i, j), v in entries.items():
        S[i, j] = S[j, i] = v
    return SimilarityMatrix(ids, S)


def make_prior(ids, entries):
    n = len(ids)
    codes = np.full((n, n), -1, dtype=np.int8)
    np.fill_diagonal(codes, 1)
    for (i, j), v in entries.items():
        codes[i, j] = codes[j, i] = v
    return PriorAdjacency(ids, codes)


IDS = ["a", "b", "c", "d"]


class TestBuildNetwork:
    def test_threshold_filter_and_classes(self):
        sim = make_sim(IDS, {(0, 1): 0.95, (0, 2): 0.92, (1, 2): 0.85})
        w = make_prior(IDS, {(0, 1): 1, (0, 2): -1, (1, 2): 1})
        net = build_network(sim, w, threshold=0.9)
        assert len(net.edges) == 2
        classes = {(e.a, e.b): e.edge_class for e in net.edges}
        assert classes[("a", "b")] == "known"
        assert classes[("a", "c")] == "novel"

    def test_strict_inequality(self):
        sim = make_sim(IDS, {(0, 1): 0.9})
        w = make_prior(IDS, {})
        net = build_network(sim, w, threshold=0.9)
        assert net.edges == []

    def test_near_one_threshold_empty(self):
        sim = make_sim(IDS, {(0, 1): 0.97, (2, 3): 0.99})
        w = make_prior(IDS, {})
        net = build_network(sim, w, threshold=1.0 - 1e-9)
        assert net.edges == []

    def test_edge_count_monotone_in_threshold(self):
        rng = np.random.default_rng(0)
        entries = {
            (i, j): rng.random() for i in range(4) for j in range(i + 1, 4)
        }
        sim = make_sim(IDS, entries)
        w = make_prior(IDS, {})
        counts = [
            len(build_network(sim, w, threshold=t).edges)
            for t in (0.1, 0.3, 0.5, 0.7, 0.9)
        ]
        assert counts == sorted(counts, reverse=True)
        nets = [build_network(sim, w, threshold=t) for t in (0.3, 0.6)]
        pairs = [{(e.a, e.b) for e in n.edges} for n in nets]
        assert pairs[1] <= pairs[0]

    def test_unlikely_class(self):
        sim = make_sim(IDS, {(2, 3): 0.99})
        w = make_prior(IDS, {(2, 3): 0})
        net = build_network(sim, w)
        assert net.edges[0].edge_class == "unlikely"

    def test_deterministic_order(self):
        sim = make_sim(IDS, {(0, 3): 0.95, (0, 1): 0.95, (1, 2): 0.95})
        w = make_prior(IDS, {})
        net = build_network(sim, w)
        assert [(e.a, e.b) for e in net.edges] == [("a", "b"), ("a", "d"), ("b", "c")]


class TestNeighborhood:
    def _net(self):
        sim = make_sim(IDS, {(0, 1): 0.95, (1, 2): 0.93})
        w = make_prior(IDS, {})
        return build_network(sim, w)

    def test_isolated_seed(self):
        net = self._net()
        sub = neighborhood(net, {"d"})
        assert sub.nodes == ["d"]
        assert sub.edges == []

    def test_all_seeds_full_network(self):
        net = self._net()
        sub = neighborhood(net, set(IDS))
        assert sub.nodes == net.nodes
        assert sub.edges == net.edges

    def test_star_center(self):
        ids = ["hub", "s1", "s2", "s3"]
        sim = make_sim(ids, {(0, 1): 0.95, (0, 2): 0.95, (0, 3): 0.95})
        net = build_network(sim, make_prior(ids, {}))
        sub = neighborhood(net, {"hub"})
        assert set(sub.nodes) == set(ids)
        assert len(sub.edges) == 3

    def test_induced_edges_between_neighbors(self):
        ids = ["s", "x", "y", "z"]
        sim = make_sim(ids, {(0, 1): 0.95, (0, 2): 0.95, (1, 2): 0.99})
        net = build_network(sim, make_prior(ids, {}))
        sub = neighborhood(net, {"s"})
        assert len(sub.edges) == 3  # includes the x-y edge

    def test_unknown_seed(self):
        with pytest.raises(KeyError):
            neighborhood(self._net(), {"zzz"})


class TestDegreeReport:
    def test_triangle(self):
        ids = ["a", "b", "c"]
        sim = make_sim(ids, {(0, 1): 0.95, (0, 2): 0.95, (1, 2): 0.95})
        net = build_network(sim, make_prior(ids, {}))
        assert degree_report(net) == [("a", 2), ("b", 2), ("c", 2)]

    def test_empty_network(self):
        sim = make_sim(IDS, {})
        net = build_network(sim, make_prior(IDS, {}))
        assert degree_report(net) == [(g, 0) for g in IDS]

    def test_handshake_lemma(self):
        rng = np.random.default_rng(1)
        ids = [f"g{k}" for k in range(8)]
        entries = {
            (i, j): rng.random() for i in range(8) for j in range(i + 1, 8)
        }
        net = build_network(make_sim(ids, entries), make_prior(ids, {}), 0.5)
        assert sum(d for _, d in degree_report(net)) == 2 * len(net.edges)


class TestIO:
    def test_edge_tsv_round_trip(self, tmp_path):
        sim = make_sim(IDS, {(0, 1): 0.95, (1, 2): 0.93})
        net = build_network(sim, make_prior(IDS, {(0, 1): 1}))
        path = tmp_path / "edges.tsv"
        write_edge_tsv(net, path)
        back = read_edge_tsv(path, nodes=IDS)
        assert [(e.a, e.b, e.edge_class) for e in back.edges] == [
            (e.a, e.b, e.edge_class) for e in net.edges
        ]

    def test_dot_and_degree_outputs(self, tmp_path):
        sim = make_sim(IDS, {(0, 1): 0.95})
        net = build_network(sim, make_prior(IDS, {}))
        write_dot(net, tmp_path / "net.dot")
        write_degree_csv(net, tmp_path / "deg.csv")
        dot = (tmp_path / "net.dot").read_text()
        assert '"a" -- "b"' in dot
        deg = (tmp_path / "deg.csv").read_text().splitlines()
        assert deg[0] == "gene,degree"
        assert deg[1] == "a,1"
