import math

import numpy as np
import pytest

import quadform as qf
from quadform.reference import sample_reduced

from conftest import random_reduced

CHI22 = qf.ReducedForm([1.0], [2], [0.0])
EX2 = qf.ReducedForm([25.0, -25.0], [2, 1], [1186 / 625, 64 / 625], 0.0, -1122 / 25)


def effective_mgf(eff, t):
    """Direct evaluation over the ungrouped representation (independent route)."""
    g = 1.0 - 2.0 * eff.lam * t
    return math.exp(
        t * float(np.sum(eff.h2 * eff.lam / g))
        + 0.5 * (eff.sigma_gauss * t) ** 2
        + eff.const * t
        - 0.5 * float(np.sum(np.log(g)))
    )


class TestMgf:
    def test_chi22_value(self):
        assert abs(qf.mgf(CHI22, 0.25) - 2.0) < 1e-14

    def test_normalized_at_zero(self, rng):
        for _ in range(5):
            red = random_reduced(rng, gaussian=True)
            assert qf.mgf(red, 0.0) == 1.0

    def test_reduced_equals_effective_route(self):
        eff = EX2.effective()
        t = 0.005
        assert abs(qf.mgf(EX2, t) - effective_mgf(eff, t)) < 1e-12 * qf.mgf(EX2, t)

    def test_domain(self):
        assert qf.mgf_domain(qf.ReducedForm([2.0, -2.0], [1, 1], [0, 0])) == \
            qf.MgfDomain(-0.25, 0.25)
        dom = qf.mgf_domain(qf.ReducedForm([0.5], [1], [0.0]))
        assert dom.t_left == -math.inf and dom.t_right == 1.0
        dom = qf.mgf_domain(qf.ReducedForm([-1.0, -3.0], [1, 1], [0, 0]))
        assert dom.t_left == -1 / 6 and dom.t_right == math.inf

    def test_outside_domain_raises(self):
        with pytest.raises(qf.DomainError) as exc:
            qf.mgf(CHI22, 0.5)
        assert exc.value.interval == (-math.inf, 0.5)

    def test_blows_up_at_right_edge(self):
        red = qf.ReducedForm([1.0, 0.3], [2, 1], [0.5, 0.0])
        t_r = qf.mgf_domain(red).t_right
        ts = t_r * (1.0 - np.logspace(-1, -8, 8))
        vals = np.array([qf.mgf(red, float(t)) for t in ts])
        finite = np.isfinite(vals)
        assert np.all(np.diff(vals[finite]) > 0)
        assert vals[-1] > 1e6  # may saturate to inf, which also passes


class TestCf:
    def test_at_zero(self):
        assert qf.cf(CHI22, 0.0) == 1.0 + 0.0j

    def test_chi22(self):
        assert abs(qf.cf(CHI22, 1.0) - 1.0 / (1.0 - 2.0j)) < 1e-14

    def test_hermitian_and_bounded(self, rng):
        red = random_reduced(rng, gaussian=True)
        betas = np.linspace(0.1, 5.0, 7)
        phi_p = qf.cf(red, betas)
        phi_m = qf.cf(red, -betas)
        assert np.allclose(phi_m, np.conj(phi_p), atol=1e-14)
        assert np.all(np.abs(phi_p) <= 1.0 + 1e-12)

    def test_against_empirical_cf(self):
        red = qf.ReducedForm([1.5, -0.7], [2, 1], [0.4, 0.0], 0.5, 0.2)
        draws = sample_reduced(red, 200_000, seed=21)
        for beta in (0.1, 0.5):
            emp = np.mean(np.exp(1j * beta * draws))
            assert abs(qf.cf(red, beta) - emp) < 0.01

    def test_shift_covariance(self, rng):
        red = random_reduced(rng, gaussian=True)
        base = red.shifted(0.0)
        for beta in (0.3, 1.7):
            lhs = qf.cf(red, beta) * np.exp(-1j * beta * red.const)
            rhs = qf.cf(base, beta)
            assert abs(lhs - rhs) < 1e-14


class TestCgfDerivative:
    def test_first_derivative_is_mean(self, rng):
        for _ in range(5):
            red = random_reduced(rng, gaussian=True)
            assert abs(qf.cgf_derivative(red, 0.0, 1) - qf.cumulants(red, 1).get(1)) < 1e-12

    def test_convexity(self, rng):
        for _ in range(100):
            red = random_reduced(rng, gaussian=bool(rng.random() < 0.3))
            dom = qf.mgf_domain(red)
            lo = dom.t_left if math.isfinite(dom.t_left) else -2.0
            hi = dom.t_right if math.isfinite(dom.t_right) else 2.0
            t = float(rng.uniform(0.9 * lo, 0.9 * hi))
            assert qf.cgf_derivative(red, t, 2) > 0.0

    def test_third_derivative_matches_cumulant(self, rng):
        red = random_reduced(rng)
        assert abs(qf.cgf_derivative(red, 0.0, 3) - qf.cumulants(red, 3).get(3)) \
            < 1e-12 * (1.0 + abs(qf.cumulants(red, 3).get(3)))

    def test_fd_of_log_mgf(self, rng):
        for _ in range(50):
            red = random_reduced(rng, gaussian=bool(rng.random() < 0.3))
            dom = qf.mgf_domain(red)
            lo = dom.t_left if math.isfinite(dom.t_left) else -1.0
            hi = dom.t_right if math.isfinite(dom.t_right) else 1.0
            t = float(rng.uniform(0.7 * lo, 0.7 * hi))
            scale = min(hi - t, t - lo, 1.0)
            h = 1e-6 * scale
            fd = (qf.log_mgf(red, t + h) - qf.log_mgf(red, t - h)) / (2 * h)
            an = qf.cgf_derivative(red, t, 1)
            assert abs(fd - an) < 1e-6 * (1.0 + abs(an))


class TestCumulants:
    def test_chi2_family(self):
        for nu in (1, 3, 6):
            ks = qf.cumulants(qf.ReducedForm([1.0], [nu], [0.0]), 3)
            assert np.allclose(ks.kappa, [nu, 2 * nu, 8 * nu])

    def test_noncentral_direct(self):
        ks = qf.cumulants(qf.ReducedForm([1.0], [1], [1.0]), 3)
        assert np.allclose(ks.kappa, [2.0, 6.0, 32.0])

    def test_gaussian_contributes_first_two_only(self):
        base = qf.ReducedForm([1.0, 0.5], [2, 1], [0.3, 0.0])
        with_g = qf.ReducedForm([1.0, 0.5], [2, 1], [0.3, 0.0], 5.0)
        k0 = qf.cumulants(base, 4).kappa
        k1 = qf.cumulants(with_g, 4).kappa
        assert abs(k1[1] - k0[1] - 25.0) < 1e-12
        assert k1[0] == k0[0]
        assert np.allclose(k1[2:], k0[2:])


class TestRawMoments:
    def test_low_order_identities(self, rng):
        red = random_reduced(rng)
        ks = qf.cumulants(red, 2)
        m = qf.raw_moments(ks)
        assert abs(m[0] - ks.get(1)) < 1e-12
        assert abs(m[1] - (ks.get(2) + ks.get(1) ** 2)) < 1e-12

    def test_chi22_second_moment(self):
        m = qf.raw_moments(qf.cumulants(CHI22, 2))
        assert abs(m[1] - 8.0) < 1e-12

    def test_against_monte_carlo(self):
        red = qf.ReducedForm([1.2, -0.6], [2, 1], [0.5, 0.2], 0.7, 0.3)
        m = qf.raw_moments(qf.cumulants(red, 4))
        draws = sample_reduced(red, 2 * 10**6, seed=33)
        for k in range(1, 5):
            sample = draws**k
            est = sample.mean()
            se = sample.std(ddof=1) / math.sqrt(sample.size)
            assert abs(m[k - 1] - est) < 4.0 * se
