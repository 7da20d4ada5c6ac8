import math

import numpy as np
import pytest
from scipy import special, stats

from lpplab.analytic import DomainError, shape_fn
from lpplab.randfield import SeedSpec, tilted_exp_stream
from lpplab.tilt import (TiltSpec, boundary_log_lr, chernoff_sum_bound, exit_probability,
                         importance_tail, importance_tails, log_stay_below, martingale_constant,
                         martingale_max_check, rn_weight, sum_samples)


def test_rn_weight_examples():
    assert rn_weight(0.0, 7, 3.2) == 1
    assert rn_weight(0.5, 1, 2.0) == pytest.approx(2 * math.exp(-1))
    with pytest.raises(DomainError):
        rn_weight(1.0, 1, 1.0)


def test_rn_weight_reweights_exactly():
    # E_Q[1{S >= t} dP/dQ] recovers the gamma tail
    n, mu, t = 4, 0.6, 12.0
    s = sum_samples(SeedSpec(1, "rn"), n, 200_000, mu=mu)
    x = (s >= t) * rn_weight(mu, n, s)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - special.gammaincc(n, t)) <= 3 * se


def test_sum_samples_rows_match_streams():
    spec = SeedSpec(2, "rows")
    s = sum_samples(spec, 5, 10, mu=0.3, chunk=7)
    assert s[4] == pytest.approx(tilted_exp_stream(spec, 5, 0.3, row=4).sum(), rel=1e-15)


def test_chernoff_examples():
    assert chernoff_sum_bound(9, 0.0, "upper") == 1
    assert chernoff_sum_bound(9, 0.0, "lower") == 1
    assert chernoff_sum_bound(4, 2.0, "upper") == pytest.approx(math.exp(-4 * (1 - math.log(2))))
    assert chernoff_sum_bound(4, 2.0, "lower") == 0
    with pytest.raises(DomainError):
        chernoff_sum_bound(4, 1.0, "middle")


@pytest.mark.parametrize("n,s", [(4, 0.5), (16, 1.0), (64, 2.0)])
def test_chernoff_dominates_exact_tail(n, s):
    up = special.gammaincc(n, n + s * math.sqrt(n))
    lo = special.gammainc(n, n - s * math.sqrt(n))
    assert up <= chernoff_sum_bound(n, s, "upper")
    assert lo <= chernoff_sum_bound(n, s, "lower")


def test_tilt_spec_validation():
    TiltSpec(mu=0.5)
    with pytest.raises(DomainError):
        TiltSpec(mu=1.0)
    with pytest.raises(DomainError):
        TiltSpec(theta=0.6, w=0.5)
    with pytest.raises(DomainError):
        TiltSpec(sites=-1)


def test_boundary_log_lr_zero_tilt():
    assert not boundary_log_lr(0.5, 0.0, 10, [1.0, 2.0]).any()


def test_importance_theta_zero_is_direct():
    fam = SeedSpec(3, "is")
    v, w = (16, 16), 0.5
    est = importance_tail(fam, v, w, None, 0.0, 1.0, 500, sites=8)
    t = shape_fn(*v) + 1.0 * (32 ** (1 / 3))
    direct = importance_tails(fam, v, w, [(0.0, 0)], [t], 500)[0][0]
    assert est.p == direct.p == direct.hits / 500


def test_importance_unbiased_across_theta():
    fam = SeedSpec(4, "is2")
    v, w = (16, 16), 0.5
    t = shape_fn(*v) + 2.0 * (32 ** (1 / 3))
    a, b = importance_tails(fam, v, w, [(0.0, 0), (0.1, 8)], [t], 4000)
    a, b = a[0], b[0]
    assert abs(a.p - b.p) <= 3 * math.hypot(a.se, b.se)


def test_importance_total_mass():
    est = importance_tails(SeedSpec(5, "mass"), (8, 8), 0.5, [(0.15, 6)], [-1.0], 4000)[0][0]
    assert abs(est.p - 1) <= 3 * est.se


def test_importance_rejects_bad_rate():
    with pytest.raises(DomainError):
        importance_tails(SeedSpec(0, "x"), (4, 4), 0.5, [(0.5, 2)], [1.0], 10)


def test_log_stay_below_small_cases():
    lam = 0.7
    b1, b2 = 1.3, 2.9
    assert math.exp(log_stay_below(np.array([b1]), lam)) == pytest.approx(1 - math.exp(-lam * b1))
    exact = (1 - math.exp(-lam * b1)) - lam * b1 * math.exp(-lam * b2)
    assert math.exp(log_stay_below(np.array([b1, b2]), lam)) == pytest.approx(exact)


def test_log_stay_below_against_simulation():
    rng = np.random.default_rng(6)
    b = np.array([0.8, 2.0, 2.6, 4.5, 5.0])
    S = np.cumsum(rng.exponential(1 / 1.3, size=(400_000, 5)), axis=1)
    freq = np.mean(np.all(S < b, axis=1))
    se = math.sqrt(freq * (1 - freq) / S.shape[0])
    assert abs(math.exp(log_stay_below(b, 1.3)) - freq) <= 3 * se


def test_exit_probability_agrees_with_direct_frequency():
    est = exit_probability(SeedSpec(7, "exit"), (12, 12), 0.6, 2000)
    assert 0 < est.p < 1
    assert abs(est.p - est.direct) <= 3 * math.hypot(est.p * est.rel_se, est.direct_se)
    with pytest.raises(DomainError):
        exit_probability(SeedSpec(7, "exit"), (4, 4), 1.0, 10)


def test_martingale_examples():
    assert martingale_constant(1, 1) == 0.25
    p, se, bound = martingale_max_check(1, 1, 100, 0.0, 1000)
    assert bound == 1 and p <= 1
    p, se, bound = martingale_max_check(1, 1, 100, 30.0, 20_000, SeedSpec(8, "mg"))
    assert bound == pytest.approx(math.exp(-2.25))
    assert p <= bound + 3 * se
    assert martingale_max_check(1, 1, 50, 10.0, 500, SeedSpec(9, "d")) == \
        martingale_max_check(1, 1, 50, 10.0, 500, SeedSpec(9, "d"))


def test_tilted_stream_ks_grid():
    spec = SeedSpec(10, "ks")
    for row, mu in enumerate((-1.0, 0.0, 0.5, 0.9)):
        x = tilted_exp_stream(spec, 20_000, mu, row=row)
        assert stats.kstest(x, "expon", args=(0, 1 / (1 - mu))).pvalue > 0.01
