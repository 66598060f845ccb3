import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leadlag.prior import (
    PriorAdjacency,
    ScoreTable,
    Ternary,
    build_prior,
    read_dense_prior_csv,
    read_score_csv,
    write_dense_prior_csv,
)
from leadlag.timeseries import DataError

IDS = ["g1", "g2", "g3", "g4"]


def table(rows, db):
    return ScoreTable.from_rows(rows, db)


class TestBuildPrior:
    def test_score_above_threshold_is_one(self):
        t = table([("g1", "g2", 0.6)], IDS)
        w = build_prior(t, IDS)
        assert w.lookup(0, 1) is Ternary.ONE

    def test_score_at_threshold_is_zero(self):
        t = table([("g1", "g2", 0.5)], IDS)
        w = build_prior(t, IDS)
        assert w.lookup(0, 1) is Ternary.ZERO

    def test_pair_absent_from_database_is_na(self):
        t = table([], {"g1", "g2"})  # g3, g4 not covered
        corr = np.full((4, 4), 0.99)
        w = build_prior(t, IDS, replicate_corr=corr)
        assert w.lookup(2, 3) is Ternary.NA
        assert w.lookup(0, 2) is Ternary.NA

    def test_unknown_score_promoted_by_replicate_corr(self):
        t = table([], set(IDS))
        corr = np.zeros((4, 4))
        corr[0, 1] = corr[1, 0] = 0.9
        corr[0, 2] = corr[2, 0] = 0.7
        w = build_prior(t, IDS, replicate_corr=corr)
        assert w.lookup(0, 1) is Ternary.ONE
        assert w.lookup(0, 2) is Ternary.NA  # weak evidence stays unknown

    def test_listed_na_score_behaves_like_unknown(self):
        t = table([("g1", "g2", None)], set(IDS))
        w = build_prior(t, IDS)
        assert w.lookup(0, 1) is Ternary.NA

    def test_rejects_score_outside_unit_interval(self):
        with pytest.raises(DataError):
            table([("g1", "g2", 1.5)], IDS)

    def test_rejects_conflicting_rows(self):
        with pytest.raises(DataError):
            table([("g1", "g2", 0.3), ("g2", "g1", 0.7)], IDS)

    def test_symmetric_duplicates_allowed(self):
        t = table([("g1", "g2", 0.9), ("g2", "g1", 0.9)], IDS)
        w = build_prior(t, IDS)
        assert w.lookup(1, 0) is Ternary.ONE

    def test_output_symmetric_and_legal(self):
        rng = np.random.default_rng(0)
        rows = []
        for i in range(len(IDS)):
            for j in range(i + 1, len(IDS)):
                if rng.random() < 0.6:
                    rows.append((IDS[i], IDS[j], float(rng.random())))
        w = build_prior(table(rows, IDS[:3]), IDS)
        assert np.array_equal(w.codes, w.codes.T)
        assert set(np.unique(w.codes)) <= {-1, 0, 1}

    @given(score=st.floats(min_value=0.001, max_value=0.999))
    @settings(max_examples=40, deadline=None)
    def test_threshold_monotonicity(self, score):
        t = table([("g1", "g2", score)], IDS)
        lo = build_prior(t, IDS, score_threshold=0.3).lookup(0, 1)
        hi = build_prior(t, IDS, score_threshold=0.7).lookup(0, 1)
        # raising the threshold never converts ZERO to ONE
        assert not (lo is Ternary.ZERO and hi is Ternary.ONE)


class TestLookup:
    def test_symmetry_and_diagonal(self):
        w = PriorAdjacency.all_na(IDS)
        w.codes[0, 1] = w.codes[1, 0] = 1
        rng = np.random.default_rng(1)
        for _ in range(10):
            i, j = rng.integers(0, 4, 2)
            assert w.lookup(i, j) is w.lookup(j, i)
        assert w.lookup(2, 2) is Ternary.ONE

    def test_missing_pair_defaults_na(self):
        w = build_prior(table([("g1", "g2", 0.9)], {"g1", "g2"}), IDS)
        assert w.lookup(2, 3) is Ternary.NA

    def test_out_of_range(self):
        w = PriorAdjacency.all_na(IDS)
        with pytest.raises(IndexError):
            w.lookup(0, 4)


class TestIO:
    def test_score_csv(self, tmp_path):
        p = tmp_path / "scores.csv"
        p.write_text("gene_a,gene_b,score\ng1,g2,0.7\ng1,g3,NA\n")
        rows = read_score_csv(p)
        assert rows == [("g1", "g2", 0.7), ("g1", "g3", None)]

    def test_dense_round_trip(self, tmp_path):
        w = build_prior(table([("g1", "g2", 0.9), ("g1", "g3", 0.1)], IDS), IDS)
        p = tmp_path / "prior.csv"
        write_dense_prior_csv(w, p)
        back = read_dense_prior_csv(p)
        assert back.gene_ids == IDS
        assert np.array_equal(back.codes, w.codes)

    def test_dense_rejects_bad_cell(self, tmp_path):
        p = tmp_path / "prior.csv"
        p.write_text("gene,a,b\na,1,2\nb,2,1\n")
        with pytest.raises(DataError):
            read_dense_prior_csv(p)
