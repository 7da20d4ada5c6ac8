"""Replica-batched rolling sweeps.

A sweep regenerates each replica's field on the fly and runs several models
over that one bulk in a single pass: bulk, one-sided, two-sided and
boundary-tilted variants. Only the corner value, exit labels and probe values
are kept. Weights come from the same site-addressed streams as
:func:`lpplab.randfield.sample_field`, so every number here equals the
corresponding :func:`lpplab.lpp.lpp_values` result on the stored field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from .analytic import DomainError
from .randfield import Layer, SeedSpec, stream_keys, uniform_rows

__all__ = ["Model", "SweepResult", "sweep", "CHUNK_CELLS"]

CHUNK_CELLS = 1 << 21

_BULK, _HOR, _VER, _TWO = 0, 1, 2, 3
_KINDS = {"bulk": _BULK, "hor": _HOR, "ver": _VER, "two-sided": _TWO}


@dataclass(frozen=True)
class Model:
    """One model in a sweep.

    ``kind`` is one of "bulk", "hor", "ver", "two-sided". Horizontal boundary
    sites i <= ``tilt_sites`` use rate ``tilt_rate`` instead of ``w``; vertical
    sites j <= ``vtilt_sites`` likewise use ``vtilt_rate`` instead of 1 - z.
    """

    kind: str
    w: float = math.inf
    z: float = -math.inf
    tilt_rate: float | None = None
    tilt_sites: int = 0
    vtilt_rate: float | None = None
    vtilt_sites: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}")
        if self.kind in ("hor", "two-sided") and not (0 < self.w < math.inf):
            raise DomainError(f"{self.kind} model needs a finite positive w")
        if self.kind in ("ver", "two-sided") and not (-math.inf < self.z < 1):
            raise DomainError(f"{self.kind} model needs a finite z below 1")
        if self.tilt_sites:
            if self.kind not in ("hor", "two-sided"):
                raise DomainError("only models with a horizontal boundary can be tilted")
            if self.tilt_rate is None or not self.tilt_rate > 0:
                raise DomainError("tilted rate must be positive")
        if self.vtilt_sites:
            if self.kind not in ("ver", "two-sided"):
                raise DomainError("only models with a vertical boundary can be tilted vertically")
            if self.vtilt_rate is None or not self.vtilt_rate > 0:
                raise DomainError("tilted vertical rate must be positive")

    @classmethod
    def bulk(cls) -> "Model":
        return cls("bulk")

    @classmethod
    def hor(cls, w: float, tilt_rate: float | None = None, tilt_sites: int = 0) -> "Model":
        return cls("hor", w=w, tilt_rate=tilt_rate, tilt_sites=tilt_sites)

    @classmethod
    def ver(cls, z: float) -> "Model":
        return cls("ver", z=z)

    @classmethod
    def two_sided(cls, w: float, z: float) -> "Model":
        return cls("two-sided", w=w, z=z)

    @classmethod
    def stationary(cls, z: float) -> "Model":
        return cls("two-sided", w=z, z=z)


@dataclass(frozen=True)
class SweepResult:
    """Per-replica outputs, shapes (R, K) or (R, K, P).

    ``z_hor``/``z_ver`` are exit points of the geodesic to the corner.
    ``exit_sum`` is the boundary weight collected before leaving the axis.
    ``tilt_sum`` and ``vtilt_sum`` are the total weights on the tilted
    horizontal and vertical sites.
    """

    value: np.ndarray
    z_hor: np.ndarray
    z_ver: np.ndarray
    exit_sum: np.ndarray
    tilt_sum: np.ndarray
    vtilt_sum: np.ndarray
    probes: np.ndarray


@nb.njit(cache=True)
def _sweep_kernel(E, H, V, kind, hrate, vrate, trate, tsites, vtrate, vtsites,
                  pi, pj, value, zh, zv, esum, tsum, vtsum, pout, r0):
    R, n, m = E.shape
    K = kind.shape[0]
    P = pi.shape[0]
    neg = -np.inf
    g = np.empty((K, m + 1))
    lab = np.empty((K, m + 1), dtype=np.int64)
    hpre = np.empty((K, m + 1))
    vpre = np.empty((K, n + 1))
    for r in range(R):
        out = r0 + r
        for k in range(K):
            hpre[k, 0] = 0.0
            acc = 0.0
            ts = 0.0
            for i in range(1, m + 1):
                rate = trate[k] if i <= tsites[k] else hrate[k]
                x = H[r, i - 1] / rate
                acc += x
                hpre[k, i] = acc
                if i <= tsites[k]:
                    ts += x
            tsum[out, k] = ts
            vpre[k, 0] = 0.0
            acc = 0.0
            ts = 0.0
            for j in range(1, n + 1):
                rate = vtrate[k] if j <= vtsites[k] else vrate[k]
                x = V[r, j - 1] / rate
                acc += x
                vpre[k, j] = acc
                if j <= vtsites[k]:
                    ts += x
            vtsum[out, k] = ts
            kd = kind[k]
            for i in range(m + 1):
                lab[k, i] = i
                if kd == 0:
                    g[k, i] = 0.0
                elif kd == 2:
                    g[k, i] = neg
                elif kd == 1 and i == 0:
                    g[k, i] = neg
                else:
                    g[k, i] = hpre[k, i]
        for j in range(1, n + 1):
            row = E[r, j - 1]
            for k in range(K):
                kd = kind[k]
                if kd == 0:
                    left = 0.0
                elif kd == 1:
                    left = neg
                else:
                    left = vpre[k, j]
                llab = -j
                gk = g[k]
                lk = lab[k]
                for i in range(1, m + 1):
                    up = gk[i]
                    if up >= left:
                        left = up + row[i - 1]
                        llab = lk[i]
                    else:
                        left = left + row[i - 1]
                    gk[i] = left
                    lk[i] = llab
                if kd == 0:
                    gk[0] = 0.0
                elif kd == 1:
                    gk[0] = neg
                else:
                    gk[0] = vpre[k, j]
                lk[0] = -j
                for p in range(P):
                    if pj[p] == j:
                        pout[out, k, p] = gk[pi[p]]
        for k in range(K):
            value[out, k] = g[k, m]
            L = lab[k, m]
            if kind[k] == 0:
                L = 0
            if L > 0:
                zh[out, k] = L
                zv[out, k] = 0
                esum[out, k] = hpre[k, L]
            elif L < 0:
                zh[out, k] = 0
                zv[out, k] = -L
                esum[out, k] = vpre[k, -L]
            else:
                zh[out, k] = 0
                zv[out, k] = 0
                esum[out, k] = 0.0


def _specs_or_keys(specs) -> np.ndarray:
    if isinstance(specs, np.ndarray):
        return specs
    return stream_keys(list(specs))


def sweep(specs: Sequence[SeedSpec] | np.ndarray, m: int, n: int,
          models: Sequence[Model], probes: Sequence[tuple[int, int]] = (),
          chunk_cells: int = CHUNK_CELLS) -> SweepResult:
    """Run every model on every replica's field and collect corner statistics.

    ``probes`` are extra vertices (i, j) with 1 <= i <= m, 1 <= j <= n whose
    values are recorded for every model.
    """
    if m < 1 or n < 1:
        raise DomainError(f"extents must be positive, got ({m}, {n})")
    if not models:
        raise DomainError("need at least one model")
    for p in probes:
        if not (1 <= p[0] <= m and 1 <= p[1] <= n):
            raise DomainError(f"probe {p} outside [1..{m}] x [1..{n}]")
    keys = _specs_or_keys(specs)
    R, K, P = keys.shape[0], len(models), len(probes)
    kind = np.array([_KINDS[md.kind] for md in models], dtype=np.int64)
    hrate = np.array([md.w for md in models], dtype=np.float64)
    vrate = np.array([1.0 - md.z for md in models], dtype=np.float64)
    trate = np.array([md.tilt_rate or md.w for md in models], dtype=np.float64)
    tsites = np.array([min(md.tilt_sites, m) for md in models], dtype=np.int64)
    vtrate = np.array([md.vtilt_rate or 1.0 - md.z for md in models], dtype=np.float64)
    vtsites = np.array([min(md.vtilt_sites, n) for md in models], dtype=np.int64)
    pi = np.array([p[0] for p in probes], dtype=np.int64)
    pj = np.array([p[1] for p in probes], dtype=np.int64)
    value = np.empty((R, K))
    zh = np.empty((R, K), dtype=np.int64)
    zv = np.empty((R, K), dtype=np.int64)
    esum = np.empty((R, K))
    tsum = np.empty((R, K))
    vtsum = np.empty((R, K))
    pout = np.full((R, K, P), np.nan)
    step = max(1, chunk_cells // (m * n))
    for r0 in range(0, R, step):
        kc = keys[r0:r0 + step]
        E = uniform_rows(kc, Layer.BULK, 1, n, m)
        np.log(E, out=E)
        np.negative(E, out=E)
        H = -np.log(uniform_rows(kc, Layer.HOR, 0, 1, m)[:, 0])
        V = -np.log(uniform_rows(kc, Layer.VER, 0, 1, n)[:, 0])
        _sweep_kernel(E, H, V, kind, hrate, vrate, trate, tsites, vtrate, vtsites,
                      pi, pj, value, zh, zv, esum, tsum, vtsum, pout, r0)
    return SweepResult(value, zh, zv, esum, tsum, vtsum, pout)
