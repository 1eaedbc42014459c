"""Tests for the Gamma/Laguerre helpers and the capacity kernel."""

import math

import mpmath
import numpy as np
import pytest
from scipy import special as sp

from wishart_sum.errors import DomainError, NumericalFailure
from wishart_sum.special import (KernelIntegralTable, assoc_laguerre, capacity_kernel, capacity_kernel_quadrature,
                                 derivative_column, gcal, gen_binomial, log_capacity_kernel, log_gamma,
                                 recip_gamma, scaled_expn)


def kernel_oracle(n, beta):
    """``int_0^inf x^n exp(-beta x) log(1 + x) dx`` by mpmath tanh-sinh quadrature."""
    with mpmath.workdps(30):
        f = lambda x: x ** n * mpmath.exp(-beta * x) * mpmath.log1p(x)
        return float(mpmath.quad(f, [0, 1, n / beta + 1, mpmath.inf]))


class TestGamma:
    def test_log_gamma_examples(self):
        assert log_gamma(1.0) == 0.0
        assert log_gamma(0.5) == pytest.approx(0.5723649429247001, rel=1e-12)
        assert log_gamma(51.0) == pytest.approx(sum(math.log(k) for k in range(1, 51)), rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
    def test_log_gamma_domain(self, x):
        with pytest.raises(DomainError):
            log_gamma(x)

    def test_recip_gamma(self):
        assert recip_gamma(3) == 0.5
        assert recip_gamma(0) == 0.0
        assert recip_gamma(-2) == 0.0
        for k in range(1, 20):
            assert recip_gamma(k) * math.gamma(k) == pytest.approx(1.0, rel=1e-14)

    def test_gen_binomial_negative_top(self):
        # (-3 choose 2) = (-3)(-4)/2
        assert gen_binomial(-3, 2) == 6
        assert gen_binomial(5, 2) == 10
        assert gen_binomial(5, -1) == 0


class TestLaguerre:
    def test_examples(self):
        for nu in (-3, 0, 2, 7):
            assert assoc_laguerre(0, nu, 0.37) == 1.0
        assert assoc_laguerre(1, 2, 1.0) == pytest.approx(2.0)

    @pytest.mark.parametrize("k,alpha", [(0, 0), (3, 1), (5, 2), (8, 0), (6, 4)])
    def test_against_scipy(self, k, alpha):
        xs = np.linspace(0.0, 9.0, 13)
        ref = sp.eval_genlaguerre(k, alpha, xs)
        got = [assoc_laguerre(k, alpha, x) for x in xs]
        np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-10)

    def test_negative_alpha_against_derivative_expansion(self):
        # L_3^(-2) appears as the fourth column entry when m = 1
        m, r, u, lam = 1, 3, 1.0, 0.7
        lhs = derivative_column(r, m, u, lam)
        rhs = math.factorial(r) * u ** (m - r) * math.exp(-u * lam) * assoc_laguerre(r, m - r, u * lam)
        assert lhs == pytest.approx(rhs, rel=1e-10)
        # independent polynomial oracle
        assert assoc_laguerre(3, -2, 0.7) == pytest.approx(float(mpmath.laguerre(3, -2, 0.7)), rel=1e-10)

    def test_negative_degree(self):
        with pytest.raises(DomainError):
            assoc_laguerre(-1, 0, 1.0)


class TestDerivativeColumn:
    def test_zeroth_derivative(self):
        assert derivative_column(0, 3, 0.7, 1.1) == pytest.approx(0.7 ** 3 * math.exp(-0.77), rel=1e-15)

    def test_at_zero_lambda(self):
        assert derivative_column(1, 2, 1.0, 0.0) == 2.0

    def test_finite_difference(self):
        m, u, lam, h = 2, 0.5, 1.3, 1e-3
        g = lambda t: t ** m * math.exp(-t * lam)
        # 4-point central stencil for the third derivative
        fd = (g(u + 2 * h) - 2 * g(u + h) + 2 * g(u - h) - g(u - 2 * h)) / (2 * h ** 3)
        assert derivative_column(3, m, u, lam) == pytest.approx(fd, rel=1e-5)

    def test_high_order_against_mpmath_diff(self):
        m, u, lam = 3, 0.8, 2.2
        with mpmath.workdps(40):
            ref = mpmath.diff(lambda t: t ** m * mpmath.exp(-t * lam), u, 6)
        assert derivative_column(6, m, u, lam) == pytest.approx(float(ref), rel=1e-10)

    @pytest.mark.parametrize("m", range(1, 7))
    def test_rodrigues_identity(self, m):
        for j in range(1, 9):
            for u in (0.3, 1.0, 4.0):
                for lam in (0.0, 0.5, 3.0):
                    lhs = derivative_column(j - 1, m, u, lam)
                    size = math.factorial(j - 1) * u ** (m - j + 1) * math.exp(-u * lam)
                    rhs = size * assoc_laguerre(j - 1, m - j + 1, u * lam)
                    # exact zeros (r > m at lam = 0) come back as rounding noise on the Laguerre side
                    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-14 * size)

    def test_domain(self):
        with pytest.raises(DomainError):
            derivative_column(1, 2, 0.0, 1.0)
        with pytest.raises(DomainError):
            derivative_column(1, 2, 1.0, -1.0)


class TestScaledExpn:
    @pytest.mark.parametrize("x", [1e-3, 0.2, 1.0, 1.5, 7.0, 80.0])
    def test_against_scipy(self, x):
        got = scaled_expn(12, x)
        ref = np.array([math.exp(x) * sp.expn(k, x) for k in range(1, 13)])
        np.testing.assert_allclose(got, ref, rtol=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            scaled_expn(3, 0.0)


class TestCapacityKernel:
    def test_unit_example(self):
        assert capacity_kernel(0, 1.0) == pytest.approx(0.59634736, rel=1e-8)

    @pytest.mark.parametrize("beta", [0.5, 2.0, 10.0])
    def test_order_zero_identity(self, beta):
        # integration by parts: I(0, b) = exp(b) E1(b) / b
        ref = math.exp(beta) * sp.exp1(beta) / beta
        assert capacity_kernel(0, beta) == pytest.approx(ref, rel=1e-9)
        assert capacity_kernel(0, beta) == pytest.approx(kernel_oracle(0, beta), rel=1e-9)

    def test_monotone_in_order(self):
        vals = [capacity_kernel(n, 1.0) for n in range(7)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("beta", [0.01, 0.1, 0.7, 1.0, 3.0, 25.0, 100.0])
    def test_closed_form_vs_quadrature(self, beta):
        for n in range(13):
            cf = log_capacity_kernel(n, beta)
            q = capacity_kernel_quadrature(n, beta)
            assert abs(math.expm1(q - cf)) <= 1e-8

    @pytest.mark.parametrize("n,beta", [(0, 0.3), (4, 1.0), (9, 5.0), (12, 40.0)])
    def test_against_mpmath_oracle(self, n, beta):
        assert math.exp(log_capacity_kernel(n, beta)) == pytest.approx(kernel_oracle(n, beta), rel=1e-10)

    def test_domain_and_overflow(self):
        with pytest.raises(DomainError):
            capacity_kernel(0, 0.0)
        with pytest.raises(DomainError):
            capacity_kernel(-1, 1.0)
        with pytest.raises(NumericalFailure):
            capacity_kernel(200, 1e-3, verify=False)

    def test_table_matches_direct(self):
        table = KernelIntegralTable()
        for beta in (0.2, 3.0):
            for n in (5, 0, 11, 2):
                assert table.value(n, beta) == pytest.approx(math.exp(log_capacity_kernel(n, beta)), rel=1e-14)
        with mpmath.workdps(40):
            assert float(table.mp_value(3, 2.0)) == pytest.approx(kernel_oracle(3, 2.0), rel=1e-14)


class TestGcal:
    def test_base_integral(self):
        # i = m, j = 1, v = 1: I(0, 1) / ln 2
        assert gcal(1, 1, 1.0, 1) == pytest.approx(0.59634736 / math.log(2.0), rel=1e-8)
        m, i, v = 3, 2, 0.6
        u = 1.0 / v
        ref = u ** m * capacity_kernel(m - i, u) / (math.log(2.0) * math.factorial(m - i))
        assert gcal(i, 1, v, m) == pytest.approx(ref, rel=1e-12)

    def test_finite_difference_in_u(self):
        m, i, v, h = 2, 1, 0.8, 1e-4
        base = lambda u: gcal(i, 1, 1.0 / u, m)
        u = 1.0 / v
        fd = (base(u + h) - base(u - h)) / (2 * h)
        assert gcal(i, 2, v, m) == pytest.approx(fd, rel=1e-5)

    def test_zero_beyond_m(self):
        assert gcal(4, 1, 1.0, 3) == 0.0

    def test_positive_first_column(self):
        for m in range(1, 7):
            for i in range(1, m + 1):
                for v in (0.1, 1.0, 30.0):
                    assert gcal(i, 1, v, m) > 0

    def test_domain(self):
        with pytest.raises(DomainError):
            gcal(0, 1, 1.0, 2)
        with pytest.raises(DomainError):
            gcal(1, 1, -1.0, 2)
