import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, special

from lpplab.analytic import (BoundaryParam, DomainError, NoSolutionError, Partition, PlanePoint,
                             char_direction, cramer_rate, factorial_bounds, left_tail_exponent,
                             mean_deriv, mean_fn, moment_identity_rhs, partition_coeffs, partitions,
                             rains_log_mgf, regularized_gamma_upper, shape_fn, shift_index, sigma_fn,
                             stretched_exp_integral, zeta_fn)


def test_mean_fn_examples():
    assert mean_fn(3, 5, 0.5) == 16
    assert mean_fn(1, 1, 0.5) == 4
    with pytest.raises(DomainError):
        mean_fn(1, 1, 0)


def test_mean_deriv_examples():
    assert mean_deriv(1, 1, 0.5, 1) == 0
    assert mean_deriv(1, 1, 0.5, 2) == pytest.approx(32)
    assert mean_deriv(1, 1, 0.5, 0) == mean_fn(1, 1, 0.5)


def test_mean_deriv_matches_finite_difference():
    h = 1e-5
    for k in range(3):
        fd = (mean_deriv(3, 7, 0.4 + h, k) - mean_deriv(3, 7, 0.4 - h, k)) / (2 * h)
        assert mean_deriv(3, 7, 0.4, k + 1) == pytest.approx(fd, rel=1e-6)


def test_shape_fn_examples():
    assert shape_fn(1, 1) == 4
    assert shape_fn(4, 9) == pytest.approx(25)
    grid = np.linspace(0.01, 0.99, 99)
    coarse = min(mean_fn(1, 1, z) for z in grid)
    assert coarse == pytest.approx(4, abs=1e-6)


def test_zeta_and_sigma():
    assert zeta_fn(1, 1) == 0.5
    assert zeta_fn(4, 1) == pytest.approx(2 / 3)
    assert abs(mean_deriv(2, 5, zeta_fn(2, 5), 1)) < 1e-12
    assert sigma_fn(1, 1) == pytest.approx(2 ** (4 / 3))
    assert sigma_fn(1, 1) ** 3 == pytest.approx(0.5 * mean_deriv(1, 1, 0.5, 2))


def test_char_direction():
    d = char_direction(0.5)
    assert (d.x, d.y) == (0.5, 0.5)
    d = char_direction(2 / 3)
    assert (d.x, d.y) == pytest.approx((0.8, 0.2))
    d = char_direction(0.7)
    assert zeta_fn(d.x, d.y) == pytest.approx(0.7)


def test_rains_log_mgf():
    assert rains_log_mgf(2, 3, 0.6, 0.4) == pytest.approx(math.log(7.59375))
    assert rains_log_mgf(5, 9, 0.3, 0.3) == 0
    assert math.exp(rains_log_mgf(8, 8, 0.55, 0.45)) == pytest.approx((11 / 9) ** 16)
    # derivative in w is the mean, so the integral over [z, w] recovers it
    val, _ = integrate.quad(lambda t: mean_fn(2, 3, t), 0.4, 0.6)
    assert rains_log_mgf(2, 3, 0.6, 0.4) == pytest.approx(val, rel=1e-10)


def test_cramer_rate():
    assert cramer_rate(1) == 0
    assert cramer_rate(2) == pytest.approx(1 - math.log(2))
    assert cramer_rate(-0.5) == math.inf


@pytest.mark.parametrize("n,x", [(1, 2.0), (2, 0.0), (2, 2.0), (5, 0.3), (40, 55.0), (200, 150.0)])
def test_regularized_gamma_upper_against_scipy(n, x):
    assert regularized_gamma_upper(n, x) == pytest.approx(special.gammaincc(n, x), rel=1e-10, abs=1e-300)


def test_regularized_gamma_upper_examples():
    assert regularized_gamma_upper(1, 2) == pytest.approx(0.135335, abs=1e-6)
    assert regularized_gamma_upper(2, 0) == 1
    assert regularized_gamma_upper(2, 2) == pytest.approx(3 * math.exp(-2))


def test_partition_coeffs_examples():
    c2 = {p.parts: c for p, c in partition_coeffs(2)}
    assert c2 == {(2,): Fraction(1, 2), (1, 1): Fraction(1, 2)}
    c3 = {p.parts: c for p, c in partition_coeffs(3)}
    assert c3[(3,)] == Fraction(1, 6)
    assert c3[(1, 1, 1)] == Fraction(1, 6)
    with pytest.raises(DomainError):
        partition_coeffs(0)
    with pytest.raises(DomainError):
        partition_coeffs(21)


def test_partition_counts_and_bell_numbers():
    counts = [sum(1 for _ in partitions(p)) for p in range(1, 11)]
    assert counts == [1, 2, 3, 5, 7, 11, 15, 22, 30, 42]
    # p! * sum of coefficients is the Bell number
    for p, bell in [(1, 1), (2, 2), (3, 5), (4, 15), (5, 52), (6, 203)]:
        assert math.factorial(p) * sum(c for _, c in partition_coeffs(p)) == bell


def test_partition_type():
    lam = Partition((3, 1, 1))
    assert lam.total == 5 and len(lam) == 3
    with pytest.raises(DomainError):
        Partition((1, 2))


def test_moment_identity_rhs():
    assert moment_identity_rhs(1, 1, 0.5, 2, lambda a, b: 0.0) == 0
    # p = 2 reduces to the variance identity: m/z^2 ... minus 2 times the w-derivative term
    z, m, n, d = 0.3, 4, 6, 1.7
    rhs = moment_identity_rhs(m, n, z, 2, lambda a, b: d)
    assert rhs == pytest.approx(mean_deriv(m, n, z, 1) - 2 * d)
    with pytest.raises(DomainError):
        moment_identity_rhs(1, 1, 0.5, 1, lambda a, b: 0.0)


def test_shift_index_examples():
    assert shift_index(4, 1, 0.6) == 2
    assert shift_index(100, 100, 0.5 - 1e-9) == 1
    with pytest.raises(NoSolutionError):
        shift_index(4, 1, 0.7)


def test_left_tail_exponent_examples():
    assert left_tail_exponent(3.0, 0.4, 0.4) == 0
    assert left_tail_exponent(1, 0, 1) == pytest.approx(-4 / 3)
    s = 2.0
    assert left_tail_exponent(s, 0, math.sqrt(s)) == pytest.approx(-(4 / 3) * s ** 1.5)


def test_factorial_bounds_bracket_log_factorial():
    for n in (1, 2, 5, 50, 1000):
        lo, hi = factorial_bounds(n)
        assert lo <= math.lgamma(n + 1) <= hi


def test_stretched_exp_integral_against_quadrature():
    for p, q, x in [(1.5, 1.0, 2.0), (1.0, 1.5, 0.5), (2.0, 3.0, 1.2)]:
        val, _ = integrate.quad(lambda t: t ** (p - 1) * math.exp(-t ** q), x, math.inf)
        assert stretched_exp_integral(p, q, x) == pytest.approx(val, rel=1e-8)


def test_value_types():
    assert BoundaryParam.stationary(0.3).hor_rate == 0.3
    assert BoundaryParam.stationary(0.3).ver_rate == pytest.approx(0.7)
    assert BoundaryParam().is_bulk
    assert PlanePoint(3, 4).transposed() == PlanePoint(4, 3)
    with pytest.raises(DomainError):
        PlanePoint(-1, 0)
