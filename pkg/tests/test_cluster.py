import itertools

import numpy as np
import pytest

from leadlag.cluster import (
    ClusterAssignment,
    cut,
    read_cluster_csv,
    read_dendrogram_json,
    ward_cluster,
    ward_linkage,
    write_cluster_csv,
    write_dendrogram_json,
)
from leadlag.pairwise import SimilarityMatrix
from leadlag.timeseries import DataError


def random_dissimilarity(rng, n):
    pts = rng.normal(size=(n, 3))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    return d


def ward_oracle(D, square_input=True):
    """Exhaustive Ward: recompute the ESS increase for every candidate pair
    at every step, pick the min, break ties on the smallest node-id pair.

    ESS of a cluster is the mean pairwise squared dissimilarity over its
    members; a merge costs the ESS of the union minus the parts, and the
    recurrence height equals twice that cost.
    """
    d2 = D**2 if square_input else D.copy()
    n = D.shape[0]

    def ess(members):
        if len(members) < 2:
            return 0.0
        tot = sum(d2[i, j] for i, j in itertools.combinations(members, 2))
        return tot / len(members)

    clusters = {i: [i] for i in range(n)}  # node id -> members
    merges = []
    for step in range(n - 1):
        best = None
        for ida, idb in itertools.combinations(sorted(clusters), 2):
            cost = ess(clusters[ida] + clusters[idb]) - ess(clusters[ida]) - ess(
                clusters[idb]
            )
            key = (cost, ida, idb)
            if best is None or key < best:
                best = key
        cost, ida, idb = best
        members = clusters.pop(ida) + clusters.pop(idb)
        clusters[n + step] = members
        merges.append((ida, idb, 2.0 * cost, len(members)))
    return merges


class TestWardLinkage:
    def test_nearest_pair_first(self):
        D = np.array(
            [
                [0.0, 0.1, 0.9],
                [0.1, 0.0, 0.9],
                [0.9, 0.9, 0.0],
            ]
        )
        dend = ward_linkage(D)
        assert (dend.merges[0].left, dend.merges[0].right) == (0, 1)

    def test_identical_items_merge_at_zero(self):
        D = np.array(
            [
                [0.0, 0.0, 0.5, 0.6],
                [0.0, 0.0, 0.5, 0.6],
                [0.5, 0.5, 0.0, 0.7],
                [0.6, 0.6, 0.7, 0.0],
            ]
        )
        dend = ward_linkage(D)
        assert (dend.merges[0].left, dend.merges[0].right) == (0, 1)
        assert dend.merges[0].height == 0.0

    @pytest.mark.parametrize("square_input", [True, False])
    def test_matches_exhaustive_oracle(self, square_input):
        rng = np.random.default_rng(0)
        for trial in range(20):
            n = int(rng.integers(3, 9))
            D = random_dissimilarity(rng, n)
            dend = ward_linkage(D, square_input=square_input)
            expect = ward_oracle(D, square_input=square_input)
            for merge, (ida, idb, height, size) in zip(dend.merges, expect):
                assert (merge.left, merge.right) == (ida, idb)
                assert merge.height == pytest.approx(height, rel=1e-9, abs=1e-12)
                assert merge.size == size

    def test_heights_non_decreasing(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            D = random_dissimilarity(rng, 12)
            dend = ward_linkage(D)
            heights = [m.height for m in dend.merges]
            assert all(a <= b + 1e-12 for a, b in zip(heights, heights[1:]))

    def test_every_node_merged_exactly_once(self):
        rng = np.random.default_rng(7)
        D = random_dissimilarity(rng, 10)
        dend = ward_linkage(D)
        used = [m.left for m in dend.merges] + [m.right for m in dend.merges]
        # every node except the final root appears as a merge input once
        assert sorted(used) == list(range(2 * 10 - 2))

    def test_rejects_asymmetric(self):
        D = np.array([[0.0, 1.0, 2], [0.5, 0.0, 1], [2, 1, 0.0]])
        with pytest.raises(DataError):
            ward_linkage(D)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        D = random_dissimilarity(rng, 9)
        ids = [f"g{k}" for k in range(9)]
        S = SimilarityMatrix(ids, np.clip(1.0 - D / (D.max() + 1e-9), 0, 1))
        base = cut(ward_cluster(S), k=3).partition()
        perm = rng.permutation(9)
        S2 = SimilarityMatrix(
            [ids[p] for p in perm], S.S[np.ix_(perm, perm)]
        )
        shuffled = cut(ward_cluster(S2), k=3).partition()
        assert sorted(map(sorted, base)) == sorted(map(sorted, shuffled))


class TestCut:
    def _dend(self, seed=3, n=8):
        rng = np.random.default_rng(seed)
        D = random_dissimilarity(rng, n)
        ids = [f"g{k}" for k in range(n)]
        S = SimilarityMatrix(ids, np.clip(1.0 - D / (D.max() + 1e-9), 0, 1))
        return ward_cluster(S)

    def test_height_zero_gives_singletons(self):
        dend = self._dend()
        assert cut(dend, height=0.0).n_clusters == 8

    def test_k_one_single_cluster(self):
        dend = self._dend()
        assert cut(dend, k=1).n_clusters == 1

    def test_k_equals_n_all_singletons(self):
        dend = self._dend()
        assert cut(dend, k=8).n_clusters == 8

    def test_above_max_height_single_cluster(self):
        dend = self._dend()
        assert cut(dend, height=dend.max_height + 1e-9).n_clusters == 1

    def test_labels_contiguous(self):
        dend = self._dend(seed=4)
        assign = cut(dend, k=3)
        labels = sorted(set(assign.labels.values()))
        assert labels == [1, 2, 3]

    def test_invalid_k(self):
        dend = self._dend()
        with pytest.raises(ValueError):
            cut(dend, k=0)
        with pytest.raises(ValueError):
            cut(dend, k=9)
        with pytest.raises(ValueError):
            cut(dend)

    def test_recovers_separated_groups(self):
        # three tight groups far apart: k=3 recovers the truth
        rng = np.random.default_rng(5)
        centers = np.array([0.0, 10.0, 20.0])
        pts = np.concatenate([c + 0.1 * rng.normal(size=4) for c in centers])
        D = np.abs(pts[:, None] - pts[None, :])
        ids = [f"g{k}" for k in range(12)]
        S = SimilarityMatrix(ids, np.clip(1.0 - D / (D.max() + 1e-9), 0, 1))
        parts = cut(ward_cluster(S), k=3).partition()
        expect = [frozenset(ids[4 * k : 4 * k + 4]) for k in range(3)]
        assert sorted(map(sorted, parts)) == sorted(map(sorted, expect))


class TestIO:
    def test_dendrogram_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        D = random_dissimilarity(rng, 6)
        dend = ward_linkage(D)
        dend.gene_ids = [f"g{k}" for k in range(6)]
        path = tmp_path / "dend.json"
        write_dendrogram_json(dend, path)
        back = read_dendrogram_json(path)
        assert back.n_leaves == 6
        assert back.merges == dend.merges
        assert back.gene_ids == dend.gene_ids

    def test_cluster_csv_round_trip(self, tmp_path):
        assign = ClusterAssignment({"a": 1, "b": 2, "c": 1})
        path = tmp_path / "clusters.csv"
        write_cluster_csv(assign, path)
        back = read_cluster_csv(path)
        assert back.labels == assign.labels
