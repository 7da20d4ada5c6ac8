"""Closed-form quantities for exponential last-passage percolation.

Everything here is a deterministic function of its arguments: mean and shape
functions, the characteristic minimizer and curvature, the Rains moment
generating function, the Cramer rate function, the regularized incomplete
gamma function, Faa di Bruno coefficients and a handful of bound evaluators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Mapping

__all__ = [
    "DomainError",
    "NoSolutionError",
    "PlanePoint",
    "BoundaryParam",
    "Partition",
    "mean_fn",
    "mean_deriv",
    "shape_fn",
    "zeta_fn",
    "sigma_fn",
    "char_direction",
    "rains_log_mgf",
    "cramer_rate",
    "regularized_gamma_upper",
    "partitions",
    "partition_coeffs",
    "faa_di_bruno",
    "moment_identity_rhs",
    "shift_index",
    "left_tail_exponent",
    "left_tail_correction",
    "mean_taylor_gap",
    "rate_lower_bound",
    "factorial_bounds",
    "stretched_exp_integral",
    "PARTITION_CAP",
]

PARTITION_CAP = 20


class DomainError(ValueError):
    """Argument outside the domain of a closed-form function."""


class NoSolutionError(DomainError):
    """A search had no admissible answer."""


def _check_open_unit(name: str, z: float) -> None:
    if not (0.0 < z < 1.0):
        raise DomainError(f"{name} must lie in (0,1), got {z!r}")


def _check_positive(**kw: float) -> None:
    for name, val in kw.items():
        if not (val > 0):
            raise DomainError(f"{name} must be positive, got {val!r}")


@dataclass(frozen=True)
class PlanePoint:
    x: float
    y: float

    def __post_init__(self) -> None:
        _check_positive(x=self.x, y=self.y)

    @property
    def norm(self) -> float:
        """L1 norm."""
        return self.x + self.y

    def in_cone(self, delta: float) -> bool:
        return self.x >= delta * self.y and self.y >= delta * self.x

    def transposed(self) -> "PlanePoint":
        return PlanePoint(self.y, self.x)


@dataclass(frozen=True)
class BoundaryParam:
    """Boundary rates: horizontal weights Exp(w), vertical weights Exp(1 - z).

    ``w = inf`` and ``z = -inf`` switch the corresponding boundary off
    (all-zero weights), which is how the bulk model is encoded.
    """

    w: float = math.inf
    z: float = -math.inf

    def __post_init__(self) -> None:
        if not (self.w > 0):
            raise DomainError(f"w must be positive, got {self.w!r}")
        if not (self.z < 1):
            raise DomainError(f"z must be below 1, got {self.z!r}")

    @property
    def hor_rate(self) -> float:
        return self.w

    @property
    def ver_rate(self) -> float:
        return 1.0 - self.z

    @property
    def is_bulk(self) -> bool:
        return math.isinf(self.w) and math.isinf(self.z)

    @classmethod
    def stationary(cls, z: float) -> "BoundaryParam":
        return cls(z, z)


@dataclass(frozen=True)
class Partition:
    parts: tuple[int, ...]
    multiplicities: Mapping[int, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if any(p <= 0 for p in self.parts):
            raise DomainError("parts must be positive integers")
        if any(a < b for a, b in zip(self.parts, self.parts[1:])):
            raise DomainError("parts must be nonincreasing")
        mult: dict[int, int] = {}
        for p in self.parts:
            mult[p] = mult.get(p, 0) + 1
        object.__setattr__(self, "multiplicities", mult)

    @property
    def total(self) -> int:
        return sum(self.parts)

    def __len__(self) -> int:
        return len(self.parts)


# ---------------------------------------------------------------- mean & shape


def mean_fn(x: float, y: float, z: float) -> float:
    """M^z_{x,y} = x/z + y/(1-z)."""
    _check_open_unit("z", z)
    return x / z + y / (1.0 - z)


def mean_deriv(x: float, y: float, z: float, k: int) -> float:
    """k-th derivative of the mean function in z."""
    _check_open_unit("z", z)
    if k < 0:
        raise DomainError("k must be nonnegative")
    f = math.factorial(k)
    return (-1) ** k * f * x * z ** (-(k + 1)) + f * y * (1.0 - z) ** (-(k + 1))


def shape_fn(x: float, y: float) -> float:
    _check_positive(x=x, y=y)
    return (math.sqrt(x) + math.sqrt(y)) ** 2


def zeta_fn(x: float, y: float) -> float:
    """Minimizer of z -> mean_fn(x, y, z)."""
    _check_positive(x=x, y=y)
    sx, sy = math.sqrt(x), math.sqrt(y)
    # the smaller ratio is snapped to a multiple of 2^-53 so that its complement
    # is exact; then zeta(y, x) == 1 - zeta(x, y) bit for bit
    a = (0.5 + min(sx, sy) / (sx + sy)) - 0.5
    return a if x <= y else 1.0 - a


def sigma_fn(x: float, y: float) -> float:
    """Curvature scale (half the second z-derivative of the mean at zeta)^(1/3)."""
    _check_positive(x=x, y=y)
    return (math.sqrt(x) + math.sqrt(y)) ** (4.0 / 3.0) / (x * y) ** (1.0 / 6.0)


def char_direction(z: float) -> PlanePoint:
    _check_open_unit("z", z)
    a, b = z * z, (1.0 - z) ** 2
    s = a + b
    return PlanePoint(a / s, b / s)


def rains_log_mgf(m: int, n: int, w: float, z: float) -> float:
    """log E exp((w - z) G^{w,z}_{m,n})."""
    _check_open_unit("w", w)
    _check_open_unit("z", z)
    return m * math.log(w / z) + n * math.log((1.0 - z) / (1.0 - w))


# ------------------------------------------------------- rate & gamma functions


def cramer_rate(x: float) -> float:
    """I(x) = x - 1 - ln x for x > 0, infinite otherwise."""
    if x <= 0:
        return math.inf
    return x - 1.0 - math.log(x)


_GAMMA_EPS = 1e-15
_GAMMA_MAXITER = 100_000


def _log_prefactor(a: float, x: float) -> float:
    return -x + a * math.log(x) - math.lgamma(a)


def _gamma_lower_series(a: float, x: float) -> float:
    # P(a, x) via sum x^k / ((a)(a+1)...(a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAXITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    else:  # pragma: no cover
        raise ArithmeticError("incomplete gamma series did not converge")
    return total * math.exp(_log_prefactor(a, x))


def _gamma_upper_cf(a: float, x: float) -> float:
    # Q(a, x) via modified Lentz continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAXITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    else:  # pragma: no cover
        raise ArithmeticError("incomplete gamma continued fraction did not converge")
    return math.exp(_log_prefactor(a, x)) * h


def _gamma_q(a: float, x: float) -> float:
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_lower_series(a, x))
    return _gamma_upper_cf(a, x)


def regularized_gamma_upper(n: int, x: float) -> float:
    """P{S_n >= x} for S_n a sum of n i.i.d. Exp(1) variables.

    Series below x = n + 1, continued fraction above.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n!r}")
    if not (x >= 0):
        raise DomainError(f"x must be nonnegative, got {x!r}")
    return _gamma_q(float(n), float(x))


# ------------------------------------------------------- partitions & Bell sums


def partitions(p: int) -> Iterator[Partition]:
    """All partitions of p, reverse-lexicographic (``(p)`` first)."""
    if p < 1 or p > PARTITION_CAP:
        raise DomainError(f"p must lie in [1, {PARTITION_CAP}], got {p!r}")

    def rec(rest: int, cap: int) -> Iterator[tuple[int, ...]]:
        if rest == 0:
            yield ()
            return
        for first in range(min(rest, cap), 0, -1):
            for tail in rec(rest - first, first):
                yield (first,) + tail

    for parts in rec(p, p):
        yield Partition(parts)


def _coeff(lam: Partition) -> Fraction:
    c = Fraction(1)
    for j, cnt in lam.multiplicities.items():
        c /= Fraction(math.factorial(j)) ** cnt * math.factorial(cnt)
    return c


def partition_coeffs(p: int) -> list[tuple[Partition, Fraction]]:
    """Faa di Bruno coefficients c_lambda = prod_j 1 / ((j!)^{#j} #j!).

    With these, p! * sum c_lambda g^{(len lambda)} prod f^{(lambda_i)} is the
    p-th derivative of g(f(x)).
    """
    return [(lam, _coeff(lam)) for lam in partitions(p)]


def faa_di_bruno(p: int, g_derivs, f_derivs):
    """p-th derivative of g o f from derivative values.

    ``g_derivs[k]`` is g^{(k)} at f(x0) and ``f_derivs[k]`` is f^{(k)}(x0).
    Works with any numeric type closed under + and * (Fraction stays exact).
    """
    total = 0
    for lam, c in partition_coeffs(p):
        term = c * g_derivs[len(lam)]
        for part in lam.parts:
            term = term * f_derivs[part]
        total = total + term
    return math.factorial(p) * total


def moment_identity_rhs(
    m: float,
    n: float,
    z: float,
    p: int,
    boundary_deriv_oracle: Callable[[int, int], float],
) -> float:
    """Right side of the central-moment identity for E[(G^z - M^z)^p].

    ``boundary_deriv_oracle(j, k)`` must return the j-th w-derivative at w = z
    of E[(G^{w,z} - M^z)^k].
    """
    if p < 2:
        raise DomainError("p must be at least 2")
    _check_open_unit("z", z)
    first = 0.0
    for lam, c in partition_coeffs(p):
        if min(lam.parts) <= 1:
            continue
        term = float(c)
        for part in lam.parts:
            term *= mean_deriv(m, n, z, part - 1)
        first += term
    first *= math.factorial(p)
    correction = sum(
        math.comb(p, k) * boundary_deriv_oracle(p - k, k) for k in range(1, p)
    )
    return first - correction


# ------------------------------------------------------------- misc evaluators


def shift_index(m: int, n: int, w: float) -> int:
    """Unique k in [1, m-1] with zeta(m-k, n) < w <= zeta(m-k+1, n)."""
    if m < 2 or n < 1:
        raise NoSolutionError(f"need m >= 2 and n >= 1, got ({m}, {n})")
    if not (zeta_fn(1, n) < w <= zeta_fn(m, n)):
        raise NoSolutionError(
            f"w={w!r} outside (zeta(1,n), zeta(m,n)] = "
            f"({zeta_fn(1, n)!r}, {zeta_fn(m, n)!r}]"
        )
    # zeta(m - k, n) decreases in k; find the smallest k with zeta(m-k, n) < w
    lo, hi = 1, m - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if zeta_fn(m - mid, n) < w:
            hi = mid
        else:
            lo = mid + 1
    return lo


def left_tail_exponent(s: float, x: float, y: float) -> float:
    """Leading Chernoff exponent -(y^3 - x^3)/3 - (y - x) s."""
    if x > y:
        raise DomainError("need x <= y")
    return -(y**3 - x**3) / 3.0 - (y - x) * s


def left_tail_correction(x: float, y: float, v_norm: float, c0: float) -> float:
    """Quartic correction c0 (x^4 + y^4) / |v|^(1/3); c0 is calibrated by the caller."""
    _check_positive(v_norm=v_norm)
    return c0 * (x**4 + y**4) / v_norm ** (1.0 / 3.0)


def mean_taylor_gap(x: float, y: float, z: float) -> float:
    """|M^z - gamma - sigma^3 (z - zeta)^2| / (|v| |z - zeta|^3)."""
    zeta = zeta_fn(x, y)
    dz = z - zeta
    if dz == 0:
        return 0.0
    gap = abs(mean_fn(x, y, z) - shape_fn(x, y) - sigma_fn(x, y) ** 3 * dz * dz)
    return gap / ((x + y) * abs(dz) ** 3)


def rate_lower_bound(x: float, side: str) -> float:
    """Explicit lower bounds for I(1 + x) ("upper") and I(1 - x) ("lower"), x >= 0."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    if side == "upper":
        return x * min(x, 1.0) / 12.0
    if side == "lower":
        return x * x / 2.0
    raise DomainError(f"side must be 'upper' or 'lower', got {side!r}")


def factorial_bounds(n: int) -> tuple[float, float]:
    """Bounds (lo, hi) on ln n!: n ln n - n and that plus ln(2n + 1)."""
    if n < 1:
        raise DomainError("n must be positive")
    base = n * math.log(n) - n
    return base, base + math.log(2 * n + 1)


def stretched_exp_integral(p: float, q: float, x: float) -> float:
    """Closed form of the integral of t^(p-1) exp(-t^q) over [x, inf).

    Equals Gamma(p/q) Q(p/q, x^q) / q.
    """
    _check_positive(p=p, q=q)
    if x < 0:
        raise DomainError("x must be nonnegative")
    r = p / q
    return math.gamma(r) * _gamma_q(r, x**q) / q
