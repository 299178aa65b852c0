import math

import numpy as np
import pytest
from scipy import stats

import quadform as qf
from quadform.forms import DaviesParams, ImhofParams
from quadform.inversion import cdf_auto_inversion
from quadform.reference import sample_reduced

from conftest import quantile_points, random_reduced

CHI21 = qf.ReducedForm([1.0], [1], [0.0])
CHI22 = qf.ReducedForm([1.0], [2], [0.0])
EX1 = qf.ReducedForm([2.0, -2.0], [1, 1], [0.125, 0.125], 2.0, 1.0)
FAILURE_CASE = qf.ReducedForm([1.0, 0.6**4], [1, 1], [1.0, 7.0])


def best_effort(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except qf.ConvergenceFailureError as exc:
        return exc.result


class TestIntegrand:
    def test_zero_limit_chi22(self):
        theta, rho = qf.imhof_integrand(CHI22, 0.0, 2.0)
        assert float(rho) == 1.0 and float(theta) == 0.0
        # the limit of sin(theta)/(u rho) equals (sum w (nu+d2) - q)/2 = 0 here
        from quadform.inversion import _imhof_f
        assert abs(float(_imhof_f(CHI22, np.array([0.0]), 2.0)[0])) < 1e-15

    def test_direct_substitution(self):
        red = qf.ReducedForm([1.0], [1], [0.0])
        theta, rho = qf.imhof_integrand(red, 1.0, 0.0)
        assert abs(float(theta) - math.pi / 8) < 1e-14
        assert abs(float(rho) - 2.0**0.25) < 1e-14

    def test_rejects_gaussian(self):
        with pytest.raises(qf.NotApplicableError):
            qf.imhof_integrand(EX1, 1.0, 0.0)


class TestCdfImhof:
    def test_chi21_known_value(self):
        res = qf.cdf_imhof(CHI21, 1.0, tol=1e-7)
        assert abs(res.value - (2 * stats.norm.cdf(1.0) - 1.0)) < 1e-6

    def test_failure_case_reports_honestly(self):
        # loose fixed parameters: the deviation must be covered by the bound
        loose = ImhofParams(u_max=5.0, panels=64, tol=1e-6)
        res = qf.cdf_imhof(FAILURE_CASE, 35.0, params=loose)
        ref = best_effort(qf.cdf_imhof, FAILURE_CASE, 35.0, tol=1e-10)
        assert 0.0 <= res.value <= 1.0  # presentation clamp
        assert abs(res.diagnostics["raw_value"] - ref.value) <= res.error_bound
        # bound-driven parameters agree with the tight reference
        res2 = best_effort(qf.cdf_imhof, FAILURE_CASE, 35.0, tol=1e-8)
        assert abs(res2.value - ref.value) <= res2.error_bound + ref.error_bound

    def test_indefinite_vs_monte_carlo(self):
        red = qf.ReducedForm([2.0, -2.0], [1, 1], [0.125, 0.125])
        res = qf.cdf_imhof(red, 0.0, tol=1e-8)
        draws = sample_reduced(red, 10**6, seed=9)
        mc = float(np.mean(draws <= 0.0))
        se = math.sqrt(mc * (1 - mc) / draws.size)
        assert abs(res.value - mc) < 3.0 * se

    def test_shift_covariance(self):
        base = qf.ReducedForm([1.0, -0.4], [2, 1], [0.3, 0.0], 0.0, 0.0)
        shifted = base.shifted(1.7)
        a = qf.cdf_imhof(shifted, 2.0, tol=1e-9)
        b = qf.cdf_imhof(base, 2.0 - 1.7, tol=1e-9)
        assert a.value == b.value

    def test_raw_value_within_bound_band(self, rng):
        for _ in range(10):
            red = random_reduced(rng, min_dof=4)
            q = quantile_points(red, (0.05,))[0]
            res = best_effort(qf.cdf_imhof, red, q, tol=1e-8)
            raw = res.diagnostics["raw_value"]
            assert -res.error_bound <= raw <= 1.0 + res.error_bound


class TestPdfImhof:
    def test_chi22_density(self):
        res = qf.pdf_imhof(CHI22, 2.0, tol=1e-8)
        assert abs(res.value - math.exp(-1.0) / 2.0) < 1e-7
        assert res.provenance == "heuristic"

    def test_symmetric_even(self):
        red = qf.ReducedForm([1.0, -1.0], [1, 1], [0.0, 0.0])
        a = qf.pdf_imhof(red, 1.0, tol=1e-7)
        b = qf.pdf_imhof(red, -1.0, tol=1e-7)
        assert abs(a.value - b.value) < 1e-9

    def test_matches_cdf_derivative(self):
        red = qf.ReducedForm([1.2, 0.7, -0.5], [2, 1, 3], [0.3, 0.0, 1.1])
        h = 1e-4
        for q in (-2.0, -0.5, 0.5, 2.0, 4.0):
            fd = (qf.cdf_imhof(red, q + h, tol=1e-10).value
                  - qf.cdf_imhof(red, q - h, tol=1e-10).value) / (2 * h)
            assert abs(qf.pdf_imhof(red, q, tol=1e-9).value - fd) < 1e-4


class TestCdfDavies:
    def test_pure_gaussian(self):
        red = qf.ReducedForm(np.zeros(0), np.zeros(0, dtype=int), np.zeros(0),
                             1.0, 0.0)
        res = qf.cdf_davies(red, 1.6448536269514722, tol=1e-7)
        assert abs(res.value - 0.95) < 1e-6

    def test_agrees_with_imhof_on_random_forms(self, rng):
        for _ in range(100):
            red = random_reduced(rng, min_dof=5)
            q = quantile_points(red, (0.25,))[0]
            a = best_effort(qf.cdf_imhof, red, q, tol=1e-7)
            b = best_effort(qf.cdf_davies, red, q, tol=1e-7)
            assert abs(a.value - b.value) <= a.error_bound + b.error_bound + 1e-10

    def test_paper_example_one_vs_monte_carlo(self):
        draws = sample_reduced(EX1, 10**7, seed=123)
        for q in (-2.0, 1.0, 5.0):
            res = qf.cdf_davies(EX1, q, tol=1e-8)
            mc = float(np.mean(draws <= q))
            se = math.sqrt(mc * (1 - mc) / draws.size)
            assert abs(res.value - mc) < 3.0 * se

    def test_convergence_factor_consistency(self):
        red = qf.ReducedForm([1.5, -0.8], [2, 2], [0.4, 0.1], 0.5, 0.0)
        base = qf.cdf_davies(red, 1.0, tol=1e-8)
        params = DaviesParams(delta=base.diagnostics["delta"],
                              k_max=base.diagnostics["k_max"],
                              tau=0.3, tol=1e-8)
        smoothed = qf.cdf_davies(red, 1.0, params=params)
        assert abs(smoothed.value - base.value) < 1e-6
        assert smoothed.diagnostics["tau"] == 0.3

    def test_lattice_halving_bound(self, rng):
        for _ in range(50):
            red = random_reduced(rng, min_dof=3, gaussian=bool(rng.random() < 0.3))
            q = quantile_points(red, (0.5,))[0]
            base = best_effort(qf.cdf_davies, red, q, tol=1e-6)
            delta = base.diagnostics["delta"]
            k_max = base.diagnostics["k_max"]
            coarse = qf.cdf_davies(red, q, params=DaviesParams(delta, k_max, tol=1e-6))
            fine = qf.cdf_davies(
                red, q, params=DaviesParams(delta / 2.0, 2 * k_max + 1, tol=1e-6))
            lattice = coarse.diagnostics["lattice_bound"]
            trunc = coarse.diagnostics["truncation_bound"] \
                + fine.diagnostics["truncation_bound"]
            assert abs(coarse.diagnostics["raw_value"] - fine.diagnostics["raw_value"]) \
                <= lattice + trunc + 1e-12

    def test_shift_covariance(self):
        base = qf.ReducedForm([1.0, -0.4], [2, 1], [0.3, 0.0], 0.7, 0.0)
        shifted = base.shifted(-0.9)
        a = qf.cdf_davies(shifted, 0.5, tol=1e-8)
        b = qf.cdf_davies(base, 0.5 + 0.9, tol=1e-8)
        assert a.value == b.value


class TestImhofTailBoundValidity:
    def test_tail_dominated_by_bound(self, rng):
        violations = 0
        for _ in range(50):
            red = random_reduced(rng, min_dof=3)
            q = quantile_points(red, (0.75,))[0]
            x = q - red.const
            for u in (3.0, 6.0, 12.0):
                bound = qf.inversion.imhof_tail_bound(red, u)
                # empirical tail over [U, 4U] with a fine fixed grid
                grid = np.linspace(u, 4.0 * u, 20001)
                f = qf.inversion._imhof_f(red, grid, x)
                tail = abs(np.trapezoid(f, grid)) / math.pi
                if tail > bound:
                    violations += 1
        assert violations == 0


class TestQuantile:
    def test_chi22_median(self):
        q = qf.quantile(CHI22, 0.5)
        assert abs(q - 2.0 * math.log(2.0)) < 1e-8

    def test_symmetric_median_zero(self):
        red = qf.ReducedForm([1.0, -1.0], [1, 1], [0.0, 0.0])
        assert abs(qf.quantile(red, 0.5)) < 1e-8

    def test_round_trip(self, rng):
        for _ in range(20):
            red = random_reduced(rng, min_dof=4, gaussian=bool(rng.random() < 0.25))
            for p in (0.01, 0.5, 0.99):
                x = qf.quantile(red, p, tol=1e-8)
                val = best_effort(cdf_auto_inversion, red, x, tol=1e-9).value
                assert abs(val - p) < 1e-8

    def test_invalid_level(self):
        with pytest.raises(qf.InvalidInputError):
            qf.quantile(CHI22, 1.5)
