import numpy as np
import pytest

from leadlag.prior import Ternary
from leadlag.regress import ModelVariant, build_design, classic_r2, ols_fit
from leadlag.simulate import (
    CohortSpec,
    GeneDynamics,
    SignalSpec,
    parse_signal,
    recovery_benchmark,
    simulate_cohort,
    simulate_gene,
)
from leadlag.timeseries import DataError, TimeGrid, fit_spline, cumulative_integral


GRID = TimeGrid(np.linspace(0.0, 24.0, 9))


class TestSignals:
    def test_pulse_shape(self):
        sig = SignalSpec.pulse(2.0, 5.0, 4.0)
        assert sig(0.0) == 0.0
        assert sig(5.0) == pytest.approx(2.0)
        assert sig(9.0) == pytest.approx(2.0 * np.exp(-1.0))

    def test_sinusoid(self):
        sig = SignalSpec.sinusoid(1.5, 24.0, phase=6.0)
        assert sig(6.0) == pytest.approx(0.0, abs=1e-12)
        assert sig(12.0) == pytest.approx(1.5)

    def test_piecewise_linear(self):
        sig = SignalSpec.piecewise_linear([(0, 0), (10, 0), (12, 1), (24, 1)])
        assert sig(5.0) == 0.0
        assert sig(11.0) == pytest.approx(0.5)
        assert sig(20.0) == 1.0

    def test_parse_round_trip(self):
        sig = parse_signal("pulse:height=2,onset=3,decay=8")
        assert sig.kind == "pulse" and sig.params == (2.0, 3.0, 8.0)
        sig = parse_signal("sin:amplitude=1,period=24")
        assert sig.kind == "sin"
        sig = parse_signal("pwl:0=0,10=0,12=1,24=1")
        assert sig.kind == "pwl" and len(sig.knots) == 4

    def test_parse_errors(self):
        with pytest.raises(DataError):
            parse_signal("blob:height=2")
        with pytest.raises(DataError):
            parse_signal("pulse:height")


class TestSimulateGene:
    def test_pure_decay_matches_analytic(self):
        dyn = GeneDynamics(alpha=0.0, beta=0.0, kappa=0.35, noise_sd=0.0, initial=1.0)
        sig = SignalSpec.pulse(0.0, 0.0, 1.0)
        samples = simulate_gene(dyn, sig, GRID, seed=0)
        expect = np.exp(-0.35 * (GRID.times - GRID.times[0]))
        np.testing.assert_allclose(samples, expect, atol=1e-6)

    def test_shared_signal_identical_dynamics(self):
        sig = SignalSpec.pulse(2.0, 3.0, 6.0)
        dyn = GeneDynamics(alpha=1.0, kappa=0.2, noise_sd=0.0)
        a = simulate_gene(dyn, sig, GRID, seed=1)
        b = simulate_gene(dyn, sig, GRID, seed=2)  # noiseless: seed irrelevant
        np.testing.assert_array_equal(a, b)

    def test_zero_everything_stays_zero(self):
        dyn = GeneDynamics(alpha=1.0, beta=0.0, kappa=0.4, noise_sd=0.0, initial=0.0)
        sig = SignalSpec.piecewise_linear([(0, 0), (24, 0)])
        samples = simulate_gene(dyn, sig, GRID, seed=3)
        np.testing.assert_array_equal(samples, np.zeros(GRID.n))

    def test_substep_convergence(self):
        dyn = GeneDynamics(alpha=1.2, beta=0.05, kappa=0.3, noise_sd=0.0, initial=0.4)
        sig = SignalSpec.sinusoid(1.0, 11.0)
        coarse = simulate_gene(dyn, sig, GRID, seed=0, substeps=1000)
        fine = simulate_gene(dyn, sig, GRID, seed=0, substeps=2000)
        scale = np.abs(fine).max()
        assert np.max(np.abs(coarse - fine)) <= 1e-8 * scale


class TestSimulateCohort:
    def _spec(self, noise=0.0, seed=0):
        sig = SignalSpec.pulse(2.5, 2.0, 7.0)
        members = [
            ("a1", GeneDynamics(alpha=1.0, kappa=0.15, noise_sd=noise)),
            ("a2", GeneDynamics(alpha=1.0, kappa=0.25, noise_sd=noise)),
        ]
        indep = [
            (
                "x1",
                GeneDynamics(alpha=1.0, kappa=0.1, noise_sd=noise),
                SignalSpec.piecewise_linear([(0, 0), (10, 0), (12, 0.5), (24, 0.5)]),
            )
        ]
        return CohortSpec(grid=GRID, groups=[(sig, members)], independent=indep, seed=seed)

    def test_truth_matrix_structure(self):
        matrix, truth = simulate_cohort(self._spec())
        assert matrix.gene_ids == ["a1", "a2", "x1"]
        assert truth.lookup(0, 1) is Ternary.ONE
        assert truth.lookup(0, 2) is Ternary.ZERO
        assert truth.lookup(1, 2) is Ternary.ZERO

    def test_determinism(self):
        m1, _ = simulate_cohort(self._spec(noise=0.2, seed=9))
        m2, _ = simulate_cohort(self._spec(noise=0.2, seed=9))
        np.testing.assert_array_equal(m1.values, m2.values)

    def test_seed_changes_noise(self):
        m1, _ = simulate_cohort(self._spec(noise=0.2, seed=1))
        m2, _ = simulate_cohort(self._spec(noise=0.2, seed=2))
        assert not np.array_equal(m1.values, m2.values)

    def test_duplicate_names_rejected(self):
        spec = self._spec()
        spec.groups[0][1].append(("x1", GeneDynamics()))
        with pytest.raises(DataError):
            simulate_cohort(spec)

    def test_coregulated_pair_fits_exactly(self):
        # zero noise, equal alpha: the pair relation holds exactly, so the
        # full-design OLS fit explains essentially all variance
        grid = TimeGrid(np.linspace(0.0, 48.0, 17))
        sig = SignalSpec.pulse(2.5, 3.0, 8.0)
        members = [
            ("a", GeneDynamics(alpha=1.0, kappa=0.12, noise_sd=0.0)),
            ("b", GeneDynamics(alpha=1.0, kappa=0.3, noise_sd=0.0)),
        ]
        spec = CohortSpec(grid=grid, groups=[(sig, members)], independent=[], seed=0)
        matrix, _ = simulate_cohort(spec)
        integ = np.array(
            [
                cumulative_integral(fit_spline(matrix.values[k], grid))
                for k in range(2)
            ]
        )
        d = build_design(
            matrix.values[0], matrix.values[1], integ[0], integ[1], grid,
            ModelVariant.FULL,
        )
        fit = ols_fit(d)
        assert classic_r2(d, fit.fitted) >= 0.99


class TestRecoveryBenchmark:
    def test_counts_and_truth(self):
        bench = recovery_benchmark(3, 4, noise_sd=0.1, seed=0)
        matrix, truth = simulate_cohort(bench.spec)
        assert matrix.n_genes == 14
        assert len(bench.shared_pairs) == 3
        assert len(bench.independent_pairs) == 4
        idx = {g: k for k, g in enumerate(matrix.gene_ids)}
        for a, b in bench.shared_pairs:
            assert truth.lookup(idx[a], idx[b]) is Ternary.ONE
        for a, b in bench.independent_pairs:
            assert truth.lookup(idx[a], idx[b]) is Ternary.ZERO

    def test_independent_series_monotone(self):
        bench = recovery_benchmark(1, 5, noise_sd=0.0, seed=1)
        matrix, _ = simulate_cohort(bench.spec)
        idx = {g: k for k, g in enumerate(matrix.gene_ids)}
        for a, b in bench.independent_pairs:
            for g in (a, b):
                diffs = np.diff(matrix.values[idx[g]])
                assert np.all(diffs >= -1e-9)
