"""Tests for the linear-algebra and sampling primitives."""

import math
from concurrent.futures import ThreadPoolExecutor

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wishart_sum.errors import DimensionError, NumericalFailure, ValidationError
from wishart_sum.numeric import (MpLU, SignedLogValue, hermitian_eigenvalues, lu_logdet, lu_logdet_batch,
                                 sample_complex_gaussian, stream_generator)


def cofactor_det(A):
    """Laplace expansion along the first row; exponential cost, exact arithmetic order."""
    n = len(A)
    if n == 1:
        return A[0][0]
    total = 0.0
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        total += (-1) ** j * A[0][j] * cofactor_det(minor)
    return total


def random_hermitian(rng, n):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (X + X.conj().T)


class TestSignedLogValue:
    def test_sign_zero_sentinel(self):
        with pytest.raises(ValidationError):
            SignedLogValue(0, 1.0)
        with pytest.raises(ValidationError):
            SignedLogValue(1, -math.inf)
        assert SignedLogValue.from_value(0.0).sign == 0

    def test_round_trip(self):
        for x in (3.5, -2e-200, 1e250):
            assert SignedLogValue.from_value(x).value == pytest.approx(x, rel=1e-14)

    def test_products(self):
        a, b = SignedLogValue.from_value(-3.0), SignedLogValue.from_value(4.0)
        assert (a * b).value == pytest.approx(-12.0)
        assert (a / b).value == pytest.approx(-0.75)
        assert (-a).value == pytest.approx(3.0)
        assert a.scaled(math.log(2.0)).value == pytest.approx(-6.0)

    def test_mpf_input_beyond_float_range(self):
        big = mpmath.mpf(10) ** 1000
        v = SignedLogValue.from_value(-big)
        assert v.sign == -1
        assert v.log_magnitude == pytest.approx(1000 * math.log(10))
        assert v.value == -math.inf


class TestLuLogdet:
    def test_identity(self):
        d = lu_logdet(np.eye(3))
        assert (d.sign, d.log_magnitude) == (1, 0.0)

    def test_diagonal(self):
        d = lu_logdet(np.diag([2.0, 3.0]))
        assert d.sign == 1
        assert d.log_magnitude == pytest.approx(math.log(6.0), abs=1e-15)

    def test_random_against_cofactor_oracle(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((5, 5))
        ref = cofactor_det(A.tolist())
        assert lu_logdet(A).value == pytest.approx(ref, rel=1e-10)

    def test_pivoting_needed(self):
        # zero leading entry: fails without row exchanges
        A = np.array([[0.0, 1.0], [1.0, 0.0]])
        d = lu_logdet(A)
        assert d.sign == -1 and d.log_magnitude == pytest.approx(0.0, abs=1e-15)

    def test_singular(self):
        assert lu_logdet(np.ones((3, 3))).sign == 0

    def test_non_square(self):
        with pytest.raises(DimensionError):
            lu_logdet(np.ones((2, 3)))

    def test_complex_real_determinant(self):
        rng = np.random.default_rng(1)
        A = random_hermitian(rng, 4)
        ref = np.prod(np.linalg.eigvalsh(A))
        assert lu_logdet(A).value == pytest.approx(ref, rel=1e-10)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(2)
        stack = rng.standard_normal((6, 4, 4))
        signs, logs = lu_logdet_batch(stack)
        for k in range(6):
            d = lu_logdet(stack[k])
            assert signs[k] == d.sign
            assert logs[k] == pytest.approx(d.log_magnitude, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_product_rule(self, seed):
        rng = np.random.default_rng(seed)
        A, B = rng.standard_normal((8, 8)), rng.standard_normal((8, 8))
        ab = lu_logdet(A) * lu_logdet(B)
        direct = lu_logdet(A @ B)
        assert ab.sign == direct.sign
        assert ab.log_magnitude == pytest.approx(direct.log_magnitude, rel=1e-9, abs=1e-9)


class TestMpLU:
    def test_solve_and_det_against_mpmath(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((6, 6))
        b = rng.standard_normal(6)
        with mpmath.workdps(40):
            rows = [[mpmath.mpf(x) for x in r] for r in A]
            lu = MpLU(rows)
            x = lu.solve([mpmath.mpf(t) for t in b])
            ref = mpmath.lu_solve(mpmath.matrix(rows), mpmath.matrix([mpmath.mpf(t) for t in b]))
            assert max(abs(x[i] - ref[i]) for i in range(6)) < mpmath.mpf(10) ** -35
            assert abs(lu.det() - mpmath.det(mpmath.matrix(rows))) < mpmath.mpf(10) ** -30

    def test_transpose_solve(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((5, 5))
        b = rng.standard_normal(5)
        with mpmath.workdps(30):
            lu = MpLU([[mpmath.mpf(x) for x in r] for r in A])
            x = np.array([float(t) for t in lu.solve_transpose([mpmath.mpf(t) for t in b])])
        np.testing.assert_allclose(A.T @ x, b, atol=1e-12)

    def test_condition_estimate_within_factor_of_exact(self):
        # Hilbert matrix: a classic ill-conditioned test case
        n = 8
        with mpmath.workdps(60):
            rows = [[mpmath.mpf(1) / (i + j + 1) for j in range(n)] for i in range(n)]
            lu = MpLU(rows)
            est = lu.condition_1norm()
            M = mpmath.matrix(rows)
            exact = mpmath.mnorm(M, 1) * mpmath.mnorm(M ** -1, 1)
            assert exact / 10 <= est <= exact * (1 + mpmath.mpf(10) ** -20)

    def test_singular_flag(self):
        with mpmath.workdps(20):
            lu = MpLU([[mpmath.mpf(1), mpmath.mpf(2)], [mpmath.mpf(2), mpmath.mpf(4)]])
            assert lu.singular and lu.logdet().sign == 0
            with pytest.raises(NumericalFailure):
                lu.solve([1, 1])


class TestHermitianEigenvalues:
    def test_diagonal(self):
        np.testing.assert_allclose(hermitian_eigenvalues(np.diag([1.0, 4.0, 2.0])), [1.0, 2.0, 4.0])

    def test_two_by_two(self):
        A = np.array([[2, 1j], [-1j, 2]])
        np.testing.assert_allclose(hermitian_eigenvalues(A), [1.0, 3.0], atol=1e-14)

    def test_characteristic_polynomial_roots(self):
        rng = np.random.default_rng(6)
        A = random_hermitian(rng, 6)
        roots = np.sort(np.real(np.roots(np.poly(A))))
        np.testing.assert_allclose(hermitian_eigenvalues(A), roots, atol=1e-8)

    def test_reconstruction(self):
        rng = np.random.default_rng(7)
        A = random_hermitian(rng, 9)
        w, U = hermitian_eigenvalues(A, eigenvectors=True)
        assert np.linalg.norm(A - U @ np.diag(w) @ U.conj().T) <= 1e-10 * np.linalg.norm(A)

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValidationError):
            hermitian_eigenvalues(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_stack(self):
        rng = np.random.default_rng(8)
        stack = np.array([random_hermitian(rng, 3) for _ in range(4)])
        w = hermitian_eigenvalues(stack)
        assert w.shape == (4, 3)
        np.testing.assert_allclose(w[2], np.linalg.eigvalsh(stack[2]))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 16), st.integers(0, 2**32 - 1))
    def test_trace_and_determinant(self, n, seed):
        A = random_hermitian(np.random.default_rng(seed), n)
        w = hermitian_eigenvalues(A)
        assert np.all(np.diff(w) >= 0)
        np.testing.assert_allclose(w.sum(), np.trace(A).real, rtol=1e-9, atol=1e-9)
        d = lu_logdet(A)
        assert np.prod(np.sign(w)) == d.sign
        np.testing.assert_allclose(np.sum(np.log(np.abs(w))), d.log_magnitude, rtol=1e-9, atol=1e-9)


class TestComplexGaussian:
    def test_zero_mean_and_variance(self):
        z = sample_complex_gaussian(11, 0, 100_000, 1, variance=2.5).ravel()
        se = math.sqrt(2.5 / 2 / z.size)  # each part has variance sigma2 / 2
        assert abs(z.mean().real) < 4 * se
        assert abs(z.mean().imag) < 4 * se
        p = np.abs(z) ** 2
        assert abs(p.mean() - 2.5) < 4 * p.std() / math.sqrt(p.size)

    def test_real_imag_split(self):
        z = sample_complex_gaussian(12, 0, 100_000, 1, variance=1.0).ravel()
        np.testing.assert_allclose([z.real.var(), z.imag.var()], [0.5, 0.5], atol=0.02)
        assert abs(np.corrcoef(z.real, z.imag)[0, 1]) < 0.02

    def test_determinism(self):
        a = sample_complex_gaussian(3, 17, 4, 5)
        b = sample_complex_gaussian(3, 17, 4, 5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, sample_complex_gaussian(3, 18, 4, 5))

    def test_order_and_threads_irrelevant(self):
        streams = list(range(40))
        serial = [sample_complex_gaussian(9, s, 3, 3) for s in streams]
        with ThreadPoolExecutor(4) as pool:
            parallel = list(pool.map(lambda s: sample_complex_gaussian(9, s, 3, 3), reversed(streams)))
        for a, b in zip(serial, reversed(parallel)):
            np.testing.assert_array_equal(a, b)

    def test_streams_are_disjoint(self):
        # stream k occupies counters [k * 2**128, ...) so neighbouring streams never overlap
        a = stream_generator(1, 0).random(5)
        b = stream_generator(1, 1).random(5)
        assert not np.any(np.isin(a, b))

    def test_invalid_variance(self):
        with pytest.raises(ValidationError):
            sample_complex_gaussian(1, 0, 2, 2, variance=0.0)
        with pytest.raises(ValidationError):
            sample_complex_gaussian(1, 0, 2, 2, variance=-1.0)
