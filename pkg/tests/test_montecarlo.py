"""Tests for the Monte Carlo harness and the experiment sweeps."""

import math

import numpy as np
import pytest
from scipy import stats

from wishart_sum.acceptance import case_i, case_iii
from wishart_sum.capacity import capacity_approx, capacity_determinantal
from wishart_sum.density import build_evaluator
from wishart_sum.errors import ValidationError
from wishart_sum.model import SumSpec, moment_summary
from wishart_sum.montecarlo import (McConfig, empirical_capacity, empirical_density, histogram_agreement,
                                    relay_specs, sample_eigenvalues, sample_wbar, sweep_error, sweep_relay)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [{"realizations": 0}, {"bins": 0}, {"workers": 0}, {"seed": -1},
                                        {"realizations": 2.5}, {"lambda_max": -1.0}, {"bins": True}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            McConfig(**kwargs)

    def test_defaults(self):
        mc = McConfig()
        assert (mc.realizations, mc.bins, mc.lambda_max, mc.workers) == (40_000, 60, None, 1)


class TestSampleWbar:
    def test_hermitian_and_shape(self):
        W = sample_wbar(case_i(), seed=1, stream=0)
        assert W.shape == (4, 4)
        np.testing.assert_array_equal(W, W.conj().T)
        assert np.all(np.linalg.eigvalsh(W) > 0)

    def test_deterministic(self):
        spec = SumSpec.from_lists(2, [2, 3], [1.0, 4.0])
        np.testing.assert_array_equal(sample_wbar(spec, 4, 9), sample_wbar(spec, 4, 9))
        assert not np.array_equal(sample_wbar(spec, 4, 9), sample_wbar(spec, 4, 10))

    def test_matches_batched_sampler(self):
        # the scalar draw and the vectorised chunk path read the same stream
        spec = SumSpec.from_lists(2, [2, 3], [1.0, 4.0])
        eigs = sample_eigenvalues(spec, McConfig(realizations=5, seed=4))
        for i in range(5):
            np.testing.assert_allclose(np.linalg.eigvalsh(sample_wbar(spec, 4, i)), eigs[i], rtol=1e-12)

    def test_scalar_is_exponential(self):
        # m = p = 1: Wbar = a |h|^2 is exponential with mean a sigma2
        spec = SumSpec.from_lists(1, [1], [2.0], sigma2=1.5)
        x = sample_eigenvalues(spec, McConfig(realizations=20_000, seed=2)).ravel()
        res = stats.kstest(x, stats.expon(scale=3.0).cdf)
        assert res.statistic < 1.628 / math.sqrt(x.size)  # 99% critical value

    def test_diagonal_moments(self):
        spec = case_iii()[0]
        mean, var = moment_summary(spec)
        _, diag = sample_eigenvalues(spec, McConfig(realizations=40_000, seed=6), diag=True)
        d = diag[:, 1]
        se_mean = d.std(ddof=1) / math.sqrt(d.size)
        se_var = math.sqrt((np.mean((d - d.mean()) ** 4) - d.var() ** 2) / d.size)
        assert abs(d.mean() - mean) <= 3 * se_mean
        assert abs(d.var(ddof=1) - var) <= 3 * se_var

    def test_rejects_non_spec(self):
        with pytest.raises(ValidationError):
            sample_eigenvalues("spec", McConfig(realizations=2))


class TestDeterminism:
    def test_worker_count_irrelevant(self):
        spec = case_i()
        a = sample_eigenvalues(spec, McConfig(realizations=5000, seed=3, workers=1))
        b = sample_eigenvalues(spec, McConfig(realizations=5000, seed=3, workers=4))
        np.testing.assert_array_equal(a, b)

    def test_prefix_stable(self):
        # realization i depends on i alone, so a shorter run is a prefix of a longer one
        spec = SumSpec.from_lists(2, [2, 2], [1.0, 3.0])
        short = sample_eigenvalues(spec, McConfig(realizations=100, seed=8))
        long = sample_eigenvalues(spec, McConfig(realizations=3000, seed=8))
        np.testing.assert_array_equal(short, long[:100])

    def test_density_bit_identical(self):
        spec = SumSpec.from_lists(2, [2, 3], [2.0, 1.0])
        mc = McConfig(realizations=3000, seed=12)
        np.testing.assert_array_equal(empirical_density(spec, mc).heights, empirical_density(spec, mc).heights)


class TestEmpiricalDensity:
    def test_area_equals_in_range_mass(self):
        spec = SumSpec.from_lists(2, [2, 3], [2.0, 1.0])
        emp = empirical_density(spec, McConfig(realizations=4000, seed=1, bins=40))
        assert np.all(np.diff(emp.bin_edges) > 0)
        assert np.all(emp.heights >= 0)
        area = float(np.sum(emp.heights * emp.widths))
        assert abs(area - (1.0 - emp.tail_fraction)) <= 1e-12
        assert emp.total == 2 * 4000 and emp.n == 4000 and emp.seed == 1
        np.testing.assert_allclose(emp.centers, 0.5 * (emp.bin_edges[1:] + emp.bin_edges[:-1]))

    def test_default_range(self):
        spec = SumSpec.from_lists(1, [2], [3.0])
        emp = empirical_density(spec, McConfig(realizations=100, seed=0, bins=5))
        assert emp.bin_edges[-1] == pytest.approx(4 * spec.mean_eigenvalue)
        emp = empirical_density(spec, McConfig(realizations=100, seed=0, bins=5, lambda_max=2.0))
        assert emp.bin_edges[-1] == 2.0

    def test_histogram_agreement_case_i(self):
        spec = case_i()
        mc = McConfig(realizations=40_000, seed=7)
        frac, probs = histogram_agreement(empirical_density(spec, mc), build_evaluator(spec))
        assert frac >= 0.95
        assert probs.size == 60 and np.all(probs >= 0) and probs.sum() <= 1.0

    def test_mean_eigenvalue(self):
        for spec in (case_i(), *case_iii()):
            eigs = sample_eigenvalues(spec, McConfig(realizations=40_000, seed=13))
            per = eigs.mean(axis=1)  # realizations are independent, the eigenvalues within one are not
            assert abs(per.mean() - spec.mean_eigenvalue) <= 4 * per.std(ddof=1) / math.sqrt(per.size)


class TestEmpiricalCapacity:
    def test_case_i(self):
        res = empirical_capacity(case_i(), McConfig(realizations=40_000, seed=7))
        exact = capacity_determinantal(case_i()).bits
        assert res.method == "monte_carlo"
        assert abs(res.bits - exact) <= max(3 * res.err_estimate, 0.005 * exact)

    def test_case_iii_cuts(self):
        for spec in case_iii():
            res = empirical_capacity(spec, McConfig(realizations=40_000, seed=21))
            exact = capacity_determinantal(spec).bits
            assert abs(res.bits - exact) <= max(3 * res.err_estimate, 0.005 * exact)

    def test_vanishing_snr(self):
        vals = [empirical_capacity(SumSpec.from_lists(2, [2, 2], [s, s]), McConfig(realizations=2000, seed=1)).bits
                for s in (1.0, 1e-2, 1e-4)]
        assert vals[0] > vals[1] > vals[2] > 0 and vals[2] < 1e-3

    def test_single_realization(self):
        assert empirical_capacity(case_i(), McConfig(realizations=1)).err_estimate == 0.0


class TestSweeps:
    def test_relay_specs(self):
        bc, mac = relay_specs(10.0)
        assert [t.a for t in bc.terms] == pytest.approx([100.0, 10.0])
        assert [t.a for t in mac.terms] == pytest.approx([10.0, 10.0])
        assert bc.m == 2 and bc.terms[0].p == 2

    def test_single_point_equals_scalar_calls(self):
        mc = McConfig(realizations=2000, seed=5)
        (a2, mc_bits, approx), = sweep_relay([10.0], mc)
        bc, mac = relay_specs(10.0)
        assert a2 == 10.0
        assert approx == min(capacity_approx(bc).bits, capacity_approx(mac).bits)
        # grid point k = 0 draws cut c from stream base (c + 1) << 64
        cuts = [empirical_capacity(spec, McConfig(2000, 5, stream_base=(cut + 1) << 64)).bits
                for cut, spec in enumerate((bc, mac))]
        assert mc_bits == min(cuts)

    def test_zero_db_endpoint_and_monotone(self):
        rows = sweep_relay([0.0, 10.0, 20.0, 30.0], McConfig(realizations=20_000, seed=11))
        _, mc0, ap0 = rows[0]
        assert abs(ap0 - mc0) <= 0.01 * mc0
        assert all(b[1] >= a[1] for a, b in zip(rows, rows[1:]))
        assert all(b[2] >= a[2] for a, b in zip(rows, rows[1:]))

    def test_relay_grid_range(self):
        with pytest.raises(ValidationError):
            sweep_relay([-1.0], McConfig(realizations=10))
        with pytest.raises(ValidationError):
            sweep_relay([31.0], McConfig(realizations=10))

    def test_error_sweep(self):
        rows = sweep_error([0.0, 1.0, 12.0], a2_db=5.0)
        assert [r for r, _ in rows] == [0.0, 1.0, 12.0]
        assert rows[0][1] == pytest.approx(0.0, abs=1e-9)  # equal terms: p_s rounding is lossless
        assert rows[1][1] < 1.0

    def test_error_sweep_geometry(self):
        rows = sweep_error([3.0], a2_db=5.0, geometry=(4, 4))
        assert rows[0][1] >= 0
