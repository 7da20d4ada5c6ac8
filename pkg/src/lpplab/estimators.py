"""Moments, tail frequencies, bootstrap intervals, KS tests and slope fits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import special

from .randfield import Layer, SeedSpec

__all__ = [
    "EstimatorError",
    "McSummary",
    "SlopeFit",
    "mc_summary",
    "bootstrap_ci",
    "bootstrap_se",
    "ks_test",
    "ks_normal",
    "linear_fit",
    "loglog_slope",
    "mean_se",
    "SUMMARY_COLUMNS",
    "write_summary_csv",
]

SUMMARY_COLUMNS = ("experiment", "N", "param", "statistic", "value", "lo", "hi", "replicas", "seed")


class EstimatorError(ValueError):
    pass


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise EstimatorError("empty sample")
    return x


@dataclass
class McSummary:
    count: int
    mean: float
    central_moments: dict[float, float] = field(default_factory=dict)
    positive_moments: dict[float, float] = field(default_factory=dict)
    tail_freqs: dict[float, float] = field(default_factory=dict)
    bootstrap: dict[str, tuple[float, float]] = field(default_factory=dict)
    seed_spec: SeedSpec | None = None

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "central_moments": {str(k): v for k, v in self.central_moments.items()},
            "positive_moments": {str(k): v for k, v in self.positive_moments.items()},
            "tail_freqs": {str(k): v for k, v in self.tail_freqs.items()},
            "bootstrap": {k: list(v) for k, v in self.bootstrap.items()},
            "seed": None if self.seed_spec is None else {
                "master_seed": self.seed_spec.master_seed,
                "experiment_id": self.seed_spec.experiment_id,
            },
        }


def mc_summary(samples, centering: float, powers: Iterable[float] = (1, 2),
               thresholds: Iterable[float] = (),
               seed_spec: SeedSpec | None = None) -> McSummary:
    """Moments of |X - c|^p and (X - c)_+^p plus frequencies of {X >= t}."""
    x = _as_samples(samples)
    d = x - centering
    ad = np.abs(d)
    pos = np.maximum(d, 0.0)
    cm, pm = {}, {}
    for p in powers:
        if p < 1:
            raise EstimatorError(f"moment power must be >= 1, got {p}")
        cm[p] = float(np.mean(ad**p))
        pm[p] = float(np.mean(pos**p))
    tails = {t: float(np.mean(x >= t)) for t in thresholds}
    return McSummary(x.size, float(x.mean()), cm, pm, tails, {}, seed_spec)


def mean_se(samples) -> tuple[float, float]:
    x = _as_samples(samples)
    if x.size < 2:
        raise EstimatorError("need at least two samples for a standard error")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _bootstrap_rng(seed: SeedSpec | int) -> np.random.Generator:
    if isinstance(seed, SeedSpec):
        key = seed.key
    else:
        key = int(seed)
    # a dedicated substream: the bootstrap layer tag folded into the key
    return np.random.Generator(np.random.Philox(key=key ^ (int(Layer.BOOTSTRAP) << 120)))


def _bootstrap_stats(samples, statistic: Callable[[np.ndarray], float] | str,
                     B: int, seed: SeedSpec | int) -> tuple[np.ndarray, float]:
    x = _as_samples(samples)
    if B < 100:
        raise EstimatorError("need at least 100 bootstrap resamples")
    rng = _bootstrap_rng(seed)
    n = x.size
    out = np.empty(B)
    if statistic == "mean" or statistic is np.mean:
        # resample means in blocks to bound memory
        block = max(1, (1 << 22) // n)
        for b0 in range(0, B, block):
            b1 = min(B, b0 + block)
            idx = rng.integers(0, n, size=(b1 - b0, n))
            out[b0:b1] = x[idx].mean(axis=1)
        point = float(x.mean())
    else:
        fn = statistic
        for b in range(B):
            out[b] = fn(x[rng.integers(0, n, size=n)])
        point = float(fn(x))
    return out, point


def bootstrap_ci(samples, statistic: Callable[[np.ndarray], float] | str = "mean",
                 B: int = 1000, level: float = 0.95,
                 seed: SeedSpec | int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval, widened if needed to contain the point estimate."""
    if not (0 < level < 1):
        raise EstimatorError("level must lie in (0,1)")
    stats, point = _bootstrap_stats(samples, statistic, B, seed)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(min(lo, point)), float(max(hi, point))


def bootstrap_se(samples, statistic: Callable[[np.ndarray], float] | str = "mean",
                 B: int = 1000, seed: SeedSpec | int = 0) -> float:
    stats, _ = _bootstrap_stats(samples, statistic, B, seed)
    return float(stats.std(ddof=1))


def ks_test(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    The p-value uses Stephens' small-sample adjustment of the Kolmogorov
    distribution, sqrt(n) + 0.12 + 0.11/sqrt(n).
    """
    x = np.sort(_as_samples(samples))
    n = x.size
    F = np.asarray(cdf(x), dtype=np.float64)
    if F.shape != x.shape or np.any(~np.isfinite(F)) or F.min() < 0 or F.max() > 1:
        raise EstimatorError("cdf must map samples into [0,1]")
    if np.any(np.diff(F) < 0):
        raise EstimatorError("cdf must be nondecreasing")
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    rn = math.sqrt(n)
    p = float(special.kolmogorov((rn + 0.12 + 0.11 / rn) * D))
    return D, min(1.0, max(0.0, p))


def ks_normal(samples) -> tuple[float, float]:
    """KS against a normal with the sample's own mean and standard deviation.

    No Lilliefors correction: the p-value is conservative-in-the-wrong-way,
    so callers gate on D rather than p.
    """
    x = _as_samples(samples)
    mu, sd = x.mean(), x.std(ddof=1)
    if sd == 0:
        raise EstimatorError("degenerate sample")
    return ks_test(x, lambda t: special.ndtr((t - mu) / sd))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    slope_se: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.slope, self.intercept, self.r2, self.slope_se


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> SlopeFit:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.size != y.size or x.size < 3:
        raise EstimatorError("need at least three points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise EstimatorError("points must be finite")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise EstimatorError("abscissae are all equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    se = math.sqrt(ss_res / (x.size - 2) / sxx)
    return SlopeFit(slope, intercept, r2, se)


def loglog_slope(points: Iterable[tuple[float, float]]) -> SlopeFit:
    """OLS of ln value on ln N."""
    pts = list(points)
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise EstimatorError("log-log fit needs positive N and values")
    return linear_fit([math.log(n) for n, _ in pts], [math.log(v) for _, v in pts])


def write_summary_csv(rows: Iterable[Mapping], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, extrasaction="ignore")
        out.writeheader()
        for row in rows:
            out.writerow({k: row.get(k, "") for k in SUMMARY_COLUMNS})
