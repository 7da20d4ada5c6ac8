"""Change of measure: likelihood ratios, Chernoff evaluators and rare-event estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from .analytic import DomainError, cramer_rate, shape_fn
from .randfield import Layer, SeedSpec, stream_key, stream_keys, uniform_rows
from .sweep import Model, sweep

__all__ = [
    "TiltSpec",
    "TailEstimate",
    "ExitEstimate",
    "rn_weight",
    "log_rn_weight",
    "chernoff_sum_bound",
    "sum_samples",
    "default_tilt_sites",
    "default_theta",
    "boundary_log_lr",
    "importance_tails",
    "importance_tail",
    "exit_probability",
    "log_stay_below",
    "martingale_max_check",
    "martingale_constant",
]


@dataclass(frozen=True)
class TiltSpec:
    """Either a sum tilt (``mu``, Exp(1) -> Exp(1 - mu)) or a boundary tilt
    (``theta`` on ``sites`` horizontal sites, Exp(w) -> Exp(w - theta))."""

    mu: float = 0.0
    theta: float = 0.0
    sites: int = 0
    w: float | None = None

    def __post_init__(self) -> None:
        if not (1.0 - self.mu > 0):
            raise DomainError(f"tilted sum rate 1 - mu must be positive, got mu={self.mu!r}")
        if self.w is not None and not (self.w - self.theta > 0):
            raise DomainError(f"tilted boundary rate w - theta must be positive")
        if self.sites < 0:
            raise DomainError("sites must be nonnegative")


def log_rn_weight(mu: float, n: int, s_n):
    if not (mu < 1):
        raise DomainError(f"mu must be below 1, got {mu!r}")
    return -n * math.log1p(-mu) - mu * np.asarray(s_n, dtype=np.float64)


def rn_weight(mu: float, n: int, s_n):
    """dP/dQ = (1 - mu)^(-n) exp(-mu s_n) for Q making the summands Exp(1 - mu)."""
    out = np.exp(log_rn_weight(mu, n, s_n))
    return float(out) if np.ndim(out) == 0 else out


def chernoff_sum_bound(n: int, s: float, side: str) -> float:
    """exp(-n I(1 +- s/sqrt(n))) for P{S_n >= n + s sqrt(n)} / P{S_n <= n - s sqrt(n)}."""
    if n < 1 or s < 0:
        raise DomainError("need n >= 1 and s >= 0")
    if side == "upper":
        x = 1.0 + s / math.sqrt(n)
    elif side == "lower":
        x = 1.0 - s / math.sqrt(n)
    else:
        raise DomainError(f"side must be 'upper' or 'lower', got {side!r}")
    rate = cramer_rate(x)
    return 0.0 if math.isinf(rate) else math.exp(-n * rate)


def sum_samples(spec: SeedSpec, n: int, count: int, mu: float = 0.0,
                chunk: int = 1 << 20) -> np.ndarray:
    """``count`` independent sums of n Exp(1 - mu) draws; sample r uses stream row r.

    Row r holds exactly ``tilted_exp_stream(spec, n, mu, row=r)``.
    """
    if not (mu < 1):
        raise DomainError(f"mu must be below 1, got {mu!r}")
    keys = stream_key(spec.key)[None, :]
    out = np.empty(count)
    rows = max(1, chunk // n)
    for r0 in range(0, count, rows):
        k = min(rows, count - r0)
        u = uniform_rows(keys, Layer.STREAM, r0, k, n)[0]
        out[r0:r0 + k] = (-np.log(u) / (1.0 - mu)).sum(axis=1)
    return out


# ------------------------------------------------------ boundary importance


def default_tilt_sites(s: float, v_norm: float) -> int:
    """ceil(s^(1/2) |v|^(2/3)), the exit-window scale."""
    return max(1, math.ceil(math.sqrt(max(s, 0.0)) * v_norm ** (2.0 / 3.0)))


def default_theta(w: float, sites: int) -> float:
    """w / sqrt(k): keeps the log-likelihood ratio variance near one."""
    return w / math.sqrt(max(sites, 1))


def boundary_log_lr(w: float, theta: float, sites: int, tilted_sum) -> np.ndarray:
    """log of prod_{i<=k} p_w(x_i) / p_{w-theta}(x_i) given the sum of the x_i."""
    t = np.asarray(tilted_sum, dtype=np.float64)
    if theta == 0 or sites == 0:
        return np.zeros_like(t)
    return sites * math.log(w / (w - theta)) - theta * t


@dataclass(frozen=True)
class TailEstimate:
    p: float
    se: float
    replicas: int
    theta: float
    sites: int
    threshold: float
    hits: int

    def to_dict(self) -> dict:
        return dict(p=self.p, se=self.se, replicas=self.replicas, theta=self.theta,
                    sites=self.sites, threshold=self.threshold, hits=self.hits)


def _family_keys(family: SeedSpec, replicas: int) -> np.ndarray:
    return stream_keys([family.replica(r) for r in range(replicas)])


def importance_tails(family: SeedSpec, v: tuple[int, int], w: float,
                     tilts: Sequence[tuple[float, int]], thresholds: Sequence[float],
                     replicas: int, z: float | None = None,
                     keys: np.ndarray | None = None) -> list[list[TailEstimate]]:
    """P{G >= t} for G = G^{w,hor}_v (or G^{w,z}_v when z is given).

    Each tilt (theta, k) samples the first k horizontal boundary sites at rate
    w - theta and reweights by the exact likelihood ratio. All tilts share the
    bulk and the boundary uniforms. Returns estimates[tilt][threshold].
    """
    m, n = v
    for theta, k in tilts:
        if not (w - theta > 0):
            raise DomainError(f"tilted rate w - theta must be positive, got {w - theta!r}")
        if k < 0:
            raise DomainError("tilted site count must be nonnegative")
    models = []
    for theta, k in tilts:
        kind = "hor" if z is None else "two-sided"
        zz = -math.inf if z is None else z
        if theta == 0 or k == 0:
            models.append(Model(kind, w=w, z=zz))
        else:
            models.append(Model(kind, w=w, z=zz, tilt_rate=w - theta, tilt_sites=k))
    if keys is None:
        keys = _family_keys(family, replicas)
    res = sweep(keys, m, n, models)
    out = []
    for c, (theta, k) in enumerate(tilts):
        lr = np.exp(boundary_log_lr(w, theta, min(k, m), res.tilt_sum[:, c]))
        row = []
        for t in thresholds:
            hit = res.value[:, c] >= t
            x = hit * lr
            se = float(x.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.nan
            row.append(TailEstimate(float(x.mean()), se, replicas, theta, k, float(t), int(hit.sum())))
        out.append(row)
    return out


def importance_tail(family: SeedSpec, v: tuple[int, int], w: float, z: float | None,
                    theta: float, s: float, replicas: int, sites: int | None = None,
                    scale: float | None = None) -> TailEstimate:
    """Estimate P{G^{w,hor}_v >= gamma_v + s scale}; scale defaults to |v|^(1/3)."""
    m, n = v
    norm = m + n
    if sites is None:
        sites = default_tilt_sites(s, norm)
    if scale is None:
        scale = norm ** (1.0 / 3.0)
    t = shape_fn(m, n) + s * scale
    return importance_tails(family, v, w, [(theta, sites)], [t], replicas, z=z)[0][0]


# ------------------------------------------------------ exit-point estimator


@nb.njit(cache=True)
def log_stay_below(b, lam):
    """log P(S_l < b_l for l = 1..n), S_l partial sums of i.i.d. Exp(lam).

    ``b`` must be increasing. S_l < b_l iff a rate-lam Poisson process has at
    least l points in [0, b_l], so the probability is propagated over the
    Poisson count, capped at n, with renormalisation at each step.
    """
    n = b.shape[0]
    if n == 0:
        return 0.0
    if b[0] <= 0:
        return -np.inf
    p = np.zeros(n + 1)
    q = np.zeros(n + 1)
    p[0] = 1.0
    lo, hi = 0, 0
    logscale = 0.0
    prev = 0.0
    for l in range(1, n + 1):
        mu = lam * (b[l - 1] - prev)
        prev = b[l - 1]
        dmax = int(mu + 12.0 * math.sqrt(mu) + 40.0)
        e0 = math.exp(-mu)
        new_hi = min(n, hi + dmax)
        for k in range(lo, new_hi + 1):
            q[k] = 0.0
        for k in range(lo, hi + 1):
            pk = p[k]
            if pk == 0.0:
                continue
            if k == n:
                q[n] += pk
                continue
            f = e0
            acc = 0.0
            top = min(dmax, n - k)
            for d in range(top):
                q[k + d] += pk * f
                acc += f
                f *= mu / (d + 1)
            if top == n - k:
                # everything beyond the cap lands in the absorbing state n
                q[n] += pk * max(0.0, 1.0 - acc)
        tot = 0.0
        for k in range(l, new_hi + 1):
            tot += q[k]
        if tot <= 0.0:
            return -np.inf
        logscale += math.log(tot)
        # renormalise and drop negligible mass from the top of the window
        lo = l
        hi = lo
        for k in range(lo, new_hi + 1):
            p[k] = q[k] / tot
            if p[k] > 1e-300:
                hi = k
        for k in range(hi + 1, new_hi + 1):
            p[k] = 0.0
    return logscale


@nb.njit(cache=True)
def _reverse_first_column(E, out):
    """out[l-1] = G_{(1,l),(m,n)} for the bulk rows E[j-1, i-1]."""
    n, m = E.shape
    g = np.empty(m)
    for j in range(n - 1, -1, -1):
        row = E[j]
        for i in range(m - 1, -1, -1):
            if j == n - 1 and i == m - 1:
                g[i] = row[i]
            elif j == n - 1:
                g[i] = row[i] + g[i + 1]
            elif i == m - 1:
                g[i] = row[i] + g[i]
            else:
                up = g[i]
                right = g[i + 1]
                g[i] = row[i] + (up if up >= right else right)
        out[j] = g[0]


@dataclass(frozen=True)
class ExitEstimate:
    log_p: float
    rel_se: float
    direct: float
    direct_se: float
    replicas: int

    @property
    def p(self) -> float:
        return math.exp(self.log_p)

    def to_dict(self) -> dict:
        return dict(log_p=self.log_p, p=self.p, rel_se=self.rel_se, direct=self.direct,
                    direct_se=self.direct_se, replicas=self.replicas)


def exit_probability(family: SeedSpec, v: tuple[int, int], z: float, replicas: int,
                     keys: np.ndarray | None = None) -> ExitEstimate:
    """P{Z^{z,hor}_v > 0} in the stationary model, by conditional Monte Carlo.

    Given the bulk and horizontal boundary, the geodesic leaves horizontally
    iff S_l + G_{(1,l),v} < G^{z,hor}_v for every l, with S_l the vertical
    boundary partial sums. That conditional probability is computed exactly
    and averaged over replicas; the raw exit frequency is returned too.
    """
    m, n = v
    if not (0 < z < 1):
        raise DomainError(f"z must lie in (0,1), got {z!r}")
    if keys is None:
        keys = _family_keys(family, replicas)
    res = sweep(keys, m, n, [Model.hor(z), Model.stationary(z)])
    logq = np.empty(replicas)
    B = np.empty(n)
    for r in range(replicas):
        E = uniform_rows(keys[r:r + 1], Layer.BULK, 1, n, m)[0]
        np.log(E, out=E)
        np.negative(E, out=E)
        _reverse_first_column(E, B)
        logq[r] = log_stay_below(res.value[r, 0] - B, 1.0 - z)
    top = logq.max()
    if math.isinf(top):
        return ExitEstimate(-math.inf, math.nan, 0.0, 0.0, replicas)
    q = np.exp(logq - top)
    qm = q.mean()
    rel = float(q.std(ddof=1) / qm / math.sqrt(replicas)) if replicas > 1 else math.nan
    hits = (res.z_hor[:, 1] > 0).astype(float)
    dse = float(hits.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.nan
    return ExitEstimate(float(top + math.log(qm)), rel, float(hits.mean()), dse, replicas)


# ------------------------------------------------------ maximal inequality


def martingale_constant(a: float, b: float) -> float:
    return min(a / 4.0, 1.0 / a**2 + 1.0 / b**2)


def martingale_max_check(a: float, b: float, n: int, x: float, replicas: int,
                         seed: SeedSpec | None = None) -> tuple[float, float, float]:
    """Empirical P{max_k M_k >= x} for M_k = sum_{i<=k} (X_i - Y_i - 1/a + 1/b).

    X ~ Exp(a), Y ~ Exp(b). Returns (empirical, standard error, bound) with
    bound exp(-C x min(x/n, 1)) and C = min(a/4, 1/a^2 + 1/b^2).
    """
    if not (a > 0 and b > 0):
        raise DomainError("rates must be positive")
    if n < 1 or replicas < 1:
        raise DomainError("need n >= 1 and replicas >= 1")
    seed = seed or SeedSpec(0, "martingale")
    keys = stream_key(seed.key)[None, :]
    drift = -1.0 / a + 1.0 / b
    hits = 0
    rows = max(1, (1 << 20) // (2 * n))
    for r0 in range(0, replicas, rows):
        k = min(rows, replicas - r0)
        u = uniform_rows(keys, Layer.STREAM, r0, k, 2 * n)[0]
        steps = -np.log(u[:, :n]) / a + np.log(u[:, n:]) / b + drift
        hits += int(np.count_nonzero(np.cumsum(steps, axis=1).max(axis=1) >= x))
    p = hits / replicas
    se = math.sqrt(p * (1 - p) / replicas)
    bound = math.exp(-martingale_constant(a, b) * x * min(x / n, 1.0))
    return p, se, bound
