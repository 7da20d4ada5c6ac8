import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import special

from lpplab.analytic import (BoundaryParam, cramer_rate, mean_fn, rains_log_mgf,
                             regularized_gamma_upper, shape_fn, zeta_fn)
from lpplab.invariants import comparison_violation
from lpplab.lpp import lpp_bruteforce, lpp_from, lpp_values
from lpplab.randfield import field_from_arrays

pos = st.floats(0.05, 50.0)
unit = st.floats(0.01, 0.99)
uniform = st.floats(1e-6, 1 - 1e-6)
# dyadic weights keep every path sum exact
dyadic = st.integers(0, 2**20).map(lambda k: k / 2**16)


def grids(max_side=4):
    return st.tuples(st.integers(1, max_side), st.integers(1, max_side)).flatmap(
        lambda s: arrays(np.float64, s, elements=dyadic))


@given(pos, pos, unit)
def test_shape_below_mean(x, y, z):
    assert shape_fn(x, y) <= mean_fn(x, y, z) * (1 + 1e-12)


@given(pos, pos)
def test_zeta_transposition(x, y):
    assert zeta_fn(y, x) == 1 - zeta_fn(x, y)
    assert math.isclose(mean_fn(x, y, zeta_fn(x, y)), shape_fn(x, y), rel_tol=1e-12)


@given(st.integers(1, 30), st.integers(1, 30), unit)
def test_rains_vanishes_on_diagonal(m, n, z):
    assert rains_log_mgf(m, n, z, z) == 0


@given(st.integers(1, 30), st.integers(1, 30), unit, unit)
def test_rains_antisymmetric(m, n, w, z):
    assert math.isclose(rains_log_mgf(m, n, w, z), -rains_log_mgf(m, n, z, w), abs_tol=1e-12)


@given(st.floats(-5, 20))
def test_cramer_rate_nonnegative(x):
    assert cramer_rate(x) >= 0


@given(st.integers(1, 150), st.floats(0, 300))
def test_gamma_tail_against_scipy(n, x):
    ref = special.gammaincc(n, x)
    got = regularized_gamma_upper(n, x)
    assert math.isclose(got, ref, rel_tol=1e-9, abs_tol=1e-300)


@settings(max_examples=60)
@given(grids())
def test_dp_equals_bruteforce(bulk):
    f = field_from_arrays(bulk)
    assert lpp_values(f, "bulk")[(f.m, f.n)] == lpp_bruteforce(f, "bulk")


@settings(max_examples=60)
@given(grids())
def test_transpose_symmetry(bulk):
    a = lpp_values(field_from_arrays(bulk), "bulk").values
    b = lpp_values(field_from_arrays(bulk.T.copy()), "bulk").values
    assert np.array_equal(a[1:, 1:], b[1:, 1:].T)


@settings(max_examples=40)
@given(grids(), st.data())
def test_boundary_domination_and_monotonicity(bulk, data):
    m, n = bulk.shape
    f = field_from_arrays(bulk,
                          hor_uniforms=data.draw(arrays(np.float64, m, elements=uniform)),
                          ver_uniforms=data.draw(arrays(np.float64, n, elements=uniform)))
    w1 = data.draw(st.floats(0.05, 0.9))
    w2 = data.draw(st.floats(w1, 0.95))
    z = data.draw(st.floats(0.05, w1))
    g = lpp_values(f, "bulk")[(m, n)]
    h1 = lpp_values(f, "one-sided-hor", BoundaryParam(w=w1))[(m, n)]
    h2 = lpp_values(f, "one-sided-hor", BoundaryParam(w=w2))[(m, n)]
    t = lpp_values(f, "two-sided", BoundaryParam(w=w1, z=z))[(m, n)]
    assert g <= h1 <= t
    assert h2 <= h1


@settings(max_examples=40)
@given(grids(4))
def test_comparison_inequalities(w):
    assert comparison_violation(w) <= 0


@settings(max_examples=40)
@given(grids(5), st.data())
def test_superadditivity(w, data):
    m, n = w.shape
    i = data.draw(st.integers(0, m - 1))
    j = data.draw(st.integers(0, n - 1))
    whole = lpp_from(w).values[m - 1, n - 1]
    head = lpp_from(w).values[i, j]
    tail = lpp_from(w, start=(i, j)).values[m - 1, n - 1] - w[i, j]
    assert head + tail <= whole
