"""Fast deterministic invariant suite behind ``lpplab verify``.

Every check here is exact or deterministic: DP against enumeration, pathwise
couplings on shared fields, the increment comparison inequalities, the
Faa di Bruno expansion, and the closed-form analytic identities.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import optimize, special

from . import analytic as an
from .experiments.runner import Check, Verdict
from .lpp import (Variant, lpp_bruteforce, lpp_from, lpp_values, northeast_values)
from .randfield import SeedSpec, boundary_weights, sample_field

__all__ = ["SUITE", "run_suite", "check_oracle", "check_couplings", "check_partitions",
           "comparison_violation"]

DEFAULT_SEED = 7


def _rng(seed: int, tag: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=SeedSpec(seed, f"verify/{tag}").key))


def check_oracle(seed: int = DEFAULT_SEED, fields: int = 500, max_steps: int = 12) -> Verdict:
    """DP equals enumeration on random fields, every variant; rolling equals full."""
    rng = _rng(seed, "oracle-params")
    fam = SeedSpec(seed, "verify/oracle")
    mism = 0
    roll = 0
    for r in range(fields):
        total = int(rng.integers(2, max_steps + 1))
        m = int(rng.integers(1, total))
        n = total - m
        field = sample_field(fam.replica(r), m, n)
        w, z = float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.05, 0.95))
        cases = [(Variant.BULK, an.BoundaryParam()), (Variant.HOR, an.BoundaryParam(w=w)),
                 (Variant.VER, an.BoundaryParam(z=z)), (Variant.TWO_SIDED, an.BoundaryParam(w, z))]
        for variant, params in cases:
            grid = lpp_values(field, variant, params)
            if grid[m, n] != lpp_bruteforce(field, variant, params):
                mism += 1
            rolled = lpp_values(field, variant, params, mode="rolling", probes=[(m, n)])
            if rolled.probes[(m, n)] != grid[m, n] or rolled.top_row[m] != grid[m, n]:
                roll += 1
        u = float(rng.uniform(0.05, 0.95))
        if northeast_values(field, u)[1, 1] != lpp_bruteforce(field, Variant.NORTHEAST, u, (1, 1)):
            mism += 1
    return Verdict.from_checks("1", [Check("DP vs enumeration mismatches", mism, hi=0),
                                     Check("rolling vs full mismatches", roll, hi=0)])


def _all_starts(weights: np.ndarray) -> np.ndarray:
    """G[a, b, i, j] = G_{(a,b),(i,j)}, NaN unless (a,b) <= (i,j)."""
    M, N = weights.shape
    out = np.full((M, N, M, N), np.nan)
    for a in range(M):
        for b in range(N):
            out[a, b] = lpp_from(weights, (a, b), backpointers=False).values
    return out


def comparison_violation(weights: np.ndarray) -> float:
    """Largest violation of the four increment comparison inequalities (<= 0 means all hold)."""
    G = _all_starts(np.asarray(weights, dtype=np.float64))
    M, N = weights.shape
    worst = -math.inf
    for a, b, i, j in np.ndindex(M, N, M, N):
        if a > i or b > j:
            continue
        g = lambda a_, b_, i_, j_: G[a_, b_, i_, j_]  # noqa: E731
        if a + 1 <= i:
            dx = g(a, b, i, j) - g(a + 1, b, i, j)
            if j + 1 < N:  # (a)
                worst = max(worst, dx - (g(a, b, i, j + 1) - g(a + 1, b, i, j + 1)))
            if i + 1 < M:  # (b)
                worst = max(worst, (g(a, b, i + 1, j) - g(a + 1, b, i + 1, j)) - dx)
        if b + 1 <= j:
            dy = g(a, b, i, j) - g(a, b + 1, i, j)
            if i + 1 < M:  # (c)
                worst = max(worst, dy - (g(a, b, i + 1, j) - g(a, b + 1, i + 1, j)))
            if j + 1 < N:  # (d)
                worst = max(worst, (g(a, b, i, j + 1) - g(a, b + 1, i, j + 1)) - dy)
    return worst


def check_couplings(seed: int = DEFAULT_SEED, grids: int = 100) -> Verdict:
    """Domination chain, rate monotonicity, superadditivity and the increment comparison inequalities."""
    rng = _rng(seed, "coupling-params")
    fam = SeedSpec(seed, "verify/coupling")
    chain = mono = sup = 0
    comp = -math.inf
    for r in range(grids):
        m, n = (int(x) for x in rng.integers(2, 11, size=2))
        field = sample_field(fam.replica(r), m, n)
        w1, w2 = sorted(float(x) for x in rng.uniform(0.05, 0.95, size=2))
        z = float(rng.uniform(0.05, 0.95))
        bulk = lpp_values(field, Variant.BULK).values[1:, 1:]
        h1 = lpp_values(field, Variant.HOR, an.BoundaryParam(w=w1)).values
        h2 = lpp_values(field, Variant.HOR, an.BoundaryParam(w=w2)).values
        two = lpp_values(field, Variant.TWO_SIDED, an.BoundaryParam(w1, z)).values
        chain += int(np.sum(bulk > h1[1:, 1:])) + int(np.sum(h1[1:, :] > two[1:, :]))
        mono += int(np.sum(h2[1:, :] > h1[1:, :]))
        hv, _ = boundary_weights(field, an.BoundaryParam(w=w1))
        hv2, _ = boundary_weights(field, an.BoundaryParam(w=w2))
        mono += int(np.sum(hv2 > hv))
        # superadditivity through the diagonal successor
        G = _all_starts(np.pad(field.bulk, ((1, 0), (1, 0))))
        for i, j in np.ndindex(m - 1, n - 1):
            p = (i + 1, j + 1)
            if G[1, 1, m, n] < G[1, 1, p[0], p[1]] + G[p[0] + 1, p[1] + 1, m, n]:
                sup += 1
        # comparison inequalities on signed real weights; dyadic values keep
        # every path sum exact, so the inequalities are tested without rounding
        comp = max(comp, comparison_violation(np.round(rng.normal(size=(m, n)) * 2**20) / 2**20))
    return Verdict.from_checks("14", [
        Check("domination chain violations", chain, hi=0),
        Check("rate monotonicity violations", mono, hi=0),
        Check("superadditivity violations", sup, hi=0),
        Check("max comparison-inequality violation", comp, hi=0.0),
    ])


def _exp_poly_derivs(p: int, x0: Fraction) -> list[Fraction]:
    """k-th derivative of exp(x + x^2) divided by exp(f(x0)), k = 0..p.

    Nested oracle: D^k e^f = P_k e^f with P_{k+1} = P_k' + f' P_k.
    """
    poly = [Fraction(1)]  # coefficients, lowest degree first
    fprime = [Fraction(1), Fraction(2)]
    out = []
    for _ in range(p + 1):
        out.append(sum(c * x0**d for d, c in enumerate(poly)))
        deriv = [d * c for d, c in enumerate(poly)][1:]
        prod = [Fraction(0)] * (len(poly) + 1)
        for d, c in enumerate(poly):
            for e, f in enumerate(fprime):
                prod[d + e] += c * f
        size = max(len(deriv), len(prod))
        poly = [(deriv[k] if k < len(deriv) else 0) + (prod[k] if k < len(prod) else 0)
                for k in range(size)]
    return out


def check_partitions(max_p: int = 5) -> Verdict:
    bad = 0
    for x0 in (Fraction(0), Fraction(1, 3), Fraction(-2, 5), Fraction(3, 2)):
        oracle = _exp_poly_derivs(max_p, x0)
        f_derivs = [x0 + x0**2, 1 + 2 * x0, Fraction(2)] + [Fraction(0)] * max_p
        for p in range(1, max_p + 1):
            got = an.faa_di_bruno(p, [Fraction(1)] * (p + 1), f_derivs)
            if got != oracle[p]:
                bad += 1
    return Verdict.from_checks("18", [Check("expansion vs nested-derivative mismatches", bad, hi=0)])


def _analytic_checks(seed: int) -> list[Verdict]:
    rng = _rng(seed, "analytic")
    pts = []
    while len(pts) < 200:
        x, y = rng.uniform(0.1, 10.0, size=2)
        if an.PlanePoint(x, y).in_cone(0.1):
            pts.append((float(x), float(y)))
    var = stat = curv = trans = bounds = 0.0
    taylor = 0.0
    for x, y in pts:
        opt = optimize.minimize_scalar(lambda z: an.mean_fn(x, y, z), bounds=(1e-9, 1 - 1e-9),
                                       method="bounded", options={"xatol": 1e-12})
        g = an.shape_fn(x, y)
        var = max(var, abs(g - opt.fun) / g)
        zeta = an.zeta_fn(x, y)
        stat = max(stat, abs(an.mean_deriv(x, y, zeta, 1)) / (x / zeta**2 + y / (1 - zeta) ** 2))
        d2 = an.mean_deriv(x, y, zeta, 2)
        curv = max(curv, abs(2 * an.sigma_fn(x, y) ** 3 - d2) / d2)
        trans = max(trans, abs(an.shape_fn(x, y) - an.shape_fn(y, x)),
                    abs(an.zeta_fn(y, x) - (1 - zeta)))
        bounds = max(bounds, (x + y) - g, g - 2 * (x + y))
    for x, y in pts[:40]:
        zeta = an.zeta_fn(x, y)
        for dz in np.linspace(-0.2, 0.2, 41):
            z = zeta + dz
            if 0 < z < 1:
                taylor = max(taylor, an.mean_taylor_gap(x, y, z))
    rate = math.inf
    for xv in np.linspace(1e-4, 20, 4001):
        rate = min(rate, an.cramer_rate(1 + xv) - an.rate_lower_bound(xv, "upper"))
        if xv < 1:
            rate = min(rate, an.cramer_rate(1 - xv) - an.rate_lower_bound(xv, "lower"))
    fact = math.inf
    for n in range(1, 21):
        lo, hi = an.factorial_bounds(n)
        lf = math.lgamma(n + 1)
        fact = min(fact, lf - lo, hi - lf)
    shift = 0
    shift += an.shift_index(4, 1, 0.6) != 2
    shift += an.shift_index(100, 100, 0.5 - 1e-9) != 1
    try:
        an.shift_index(4, 1, 0.7)
        shift += 1
    except an.NoSolutionError:
        pass
    gam = max(abs(an.regularized_gamma_upper(n, x) - special.gammaincc(n, x)) /
              max(special.gammaincc(n, x), 1e-300)
              for n in (1, 2, 5, 20, 100) for x in (0.0, 0.5, 3.0, 20.0, 90.0, 150.0)
              if special.gammaincc(n, x) > 1e-250)
    return [
        Verdict.from_checks("analytic.variational", [Check("max rel |gamma - min_z M|", var, hi=1e-8)]),
        Verdict.from_checks("analytic.stationary-point", [Check("max rel dM/dz at zeta", stat, hi=1e-10)]),
        Verdict.from_checks("analytic.curvature", [Check("max rel |2 sigma^3 - M''|", curv, hi=1e-10)]),
        Verdict.from_checks("analytic.transposition", [Check("max asymmetry", trans, hi=0.0)]),
        Verdict.from_checks("analytic.shape-bounds", [Check("max bound violation", bounds, hi=0.0)]),
        Verdict.from_checks("analytic.taylor-gap", [Check("sup gap ratio (finite)", taylor, hi=1e6)]),
        Verdict.from_checks("analytic.rate-bounds", [Check("min I - explicit bound", rate, lo=0.0)]),
        Verdict.from_checks("analytic.factorial", [Check("min log-margin, n <= 20", fact, lo=0.0)]),
        Verdict.from_checks("analytic.shift-index", [Check("wrong answers", shift, hi=0)]),
        Verdict.from_checks("analytic.incomplete-gamma", [Check("max rel err vs scipy", gam, hi=1e-10)]),
    ]


SUITE: dict[str, Callable[[int], list[Verdict]]] = {
    "oracle": lambda seed: [check_oracle(seed)],
    "couplings": lambda seed: [check_couplings(seed)],
    "partitions": lambda seed: [check_partitions()],
    "analytic": _analytic_checks,
}


def run_suite(seed: int = DEFAULT_SEED) -> list[Verdict]:
    out = []
    for fn in SUITE.values():
        out += fn(seed)
    return out
