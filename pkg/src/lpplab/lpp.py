"""Last-passage values, geodesics, exit points and increments on a stored field.

Index convention, used everywhere in this module: arrays are indexed by
lattice coordinates directly, ``values[i, j]`` is G at vertex (i, j) with
i horizontal and j vertical. Row j = 0 is the horizontal boundary axis and
column i = 0 the vertical one. Entries outside a variant's index range hold
NaN. The northeast grid has shape (m + 2, n + 2) and lives on
[1..m+1] x [1..n+1].

On an exact floating-point tie the vertical predecessor (i, j - 1) wins.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from .analytic import BoundaryParam, DomainError
from .randfield import (
    DEFAULT_BUDGET_BYTES,
    FieldBudgetError,
    WeightField,
    boundary_weights,
    northeast_weights,
)

__all__ = [
    "Variant",
    "LppGrid",
    "RollingResult",
    "Geodesic",
    "ExitPoints",
    "LppError",
    "LppSizeError",
    "weight_table",
    "lpp_from",
    "lpp_values",
    "lpp_bruteforce",
    "geodesic_backtrack",
    "exit_points",
    "increment_profile",
    "northeast_values",
    "dump_grid_csv",
    "START",
    "FROM_LEFT",
    "FROM_BELOW",
    "OUTSIDE",
    "BRUTEFORCE_MAX_STEPS",
]

START, FROM_LEFT, FROM_BELOW, OUTSIDE = 0, 1, 2, -1
BRUTEFORCE_MAX_STEPS = 14


class LppError(ValueError):
    pass


class LppSizeError(LppError):
    pass


class Variant(str, Enum):
    BULK = "bulk"
    HOR = "one-sided-hor"
    VER = "one-sided-ver"
    TWO_SIDED = "two-sided"
    NORTHEAST = "northeast"

    @property
    def start(self) -> tuple[int, int]:
        return _STARTS[self]


_STARTS = {
    Variant.BULK: (1, 1),
    Variant.HOR: (1, 0),
    Variant.VER: (0, 1),
    Variant.TWO_SIDED: (0, 0),
}


@dataclass(frozen=True, eq=False)
class LppGrid:
    variant: Variant
    params: BoundaryParam | float | None
    values: np.ndarray
    backpointers: np.ndarray | None = None
    ties: int = 0

    @property
    def start(self) -> tuple[int, int]:
        return _STARTS.get(self.variant, (-1, -1))

    def __getitem__(self, vertex: tuple[int, int]) -> float:
        i, j = vertex
        if not (0 <= i < self.values.shape[0] and 0 <= j < self.values.shape[1]):
            raise LppError(f"vertex {vertex} outside the grid")
        val = self.values[i, j]
        if math.isnan(val):
            raise LppError(f"vertex {vertex} outside the {self.variant.value} index range")
        return float(val)


@dataclass(frozen=True)
class RollingResult:
    variant: Variant
    top_row: np.ndarray  # G(i, n) for i = 0..m, NaN outside the index range
    probes: dict[tuple[int, int], float] = dc_field(default_factory=dict)


@dataclass(frozen=True)
class Geodesic:
    vertices: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        for (a, b), (c, d) in zip(self.vertices, self.vertices[1:]):
            if (c - a, d - b) not in ((1, 0), (0, 1)):
                raise LppError(f"non up-right step {(a, b)} -> {(c, d)}")

    def __len__(self) -> int:
        return len(self.vertices)

    def weight(self, weights: np.ndarray) -> float:
        return float(sum(weights[v] for v in self.vertices))


@dataclass(frozen=True)
class ExitPoints:
    z_hor: int
    z_ver: int


# ------------------------------------------------------------------- kernels


@nb.njit(cache=True)
def _dp_table(w, si, sj, values, back):
    """Forward DP from (si, sj) over w indexed [i, j]; returns tie count."""
    M, N = w.shape
    ties = 0
    for j in range(sj, N):
        for i in range(si, M):
            if i == si and j == sj:
                values[i, j] = w[i, j]
                back[i, j] = 0
                continue
            has_left = i > si
            has_below = j > sj
            if has_left and has_below:
                left = values[i - 1, j]
                below = values[i, j - 1]
                if below >= left:
                    if below == left:
                        ties += 1
                    values[i, j] = w[i, j] + below
                    back[i, j] = 2
                else:
                    values[i, j] = w[i, j] + left
                    back[i, j] = 1
            elif has_left:
                values[i, j] = w[i, j] + values[i - 1, j]
                back[i, j] = 1
            else:
                values[i, j] = w[i, j] + values[i, j - 1]
                back[i, j] = 2
    return ties


@nb.njit(cache=True)
def _dp_rolling(w, si, sj, probe_i, probe_j, probe_out):
    M, N = w.shape
    row = np.full(M, np.nan)
    for j in range(sj, N):
        for i in range(si, M):
            if i == si and j == sj:
                row[i] = w[i, j]
            elif i > si and j > sj:
                left = row[i - 1]
                below = row[i]
                row[i] = w[i, j] + (below if below >= left else left)
            elif i > si:
                row[i] = w[i, j] + row[i - 1]
            else:
                row[i] = w[i, j] + row[i]
        for p in range(probe_i.shape[0]):
            if probe_j[p] == j:
                probe_out[p] = row[probe_i[p]]
    return row


@nb.njit(cache=True)
def _dp_reverse(w, values, back):
    """Backward DP to the top-right corner of w; back 1 = to the right, 2 = upward."""
    M, N = w.shape
    ties = 0
    for j in range(N - 1, -1, -1):
        for i in range(M - 1, -1, -1):
            if i == M - 1 and j == N - 1:
                values[i, j] = w[i, j]
                back[i, j] = 0
            elif i < M - 1 and j < N - 1:
                right = values[i + 1, j]
                up = values[i, j + 1]
                if up >= right:
                    if up == right:
                        ties += 1
                    values[i, j] = w[i, j] + up
                    back[i, j] = 2
                else:
                    values[i, j] = w[i, j] + right
                    back[i, j] = 1
            elif i < M - 1:
                values[i, j] = w[i, j] + values[i + 1, j]
                back[i, j] = 1
            else:
                values[i, j] = w[i, j] + values[i, j + 1]
                back[i, j] = 2
    return ties


# ----------------------------------------------------------- weight assembly


def _check_params(variant: Variant, params: BoundaryParam | None) -> BoundaryParam:
    if params is None:
        params = BoundaryParam()
    if not isinstance(params, BoundaryParam):
        raise LppError(f"{variant.value} needs a BoundaryParam, got {params!r}")
    w_on, z_on = math.isfinite(params.w), math.isfinite(params.z)
    need = {
        Variant.BULK: (False, False),
        Variant.HOR: (True, None),
        Variant.VER: (None, True),
        Variant.TWO_SIDED: (True, True),
    }[variant]
    for flag, want, name in ((w_on, need[0], "w"), (z_on, need[1], "z")):
        if want is not None and flag != want:
            state = "finite" if want else "the sentinel"
            raise LppError(f"variant {variant.value} needs {state} {name}, got {params!r}")
    return params


def weight_table(field: WeightField, variant: Variant | str,
                 params: BoundaryParam | None = None) -> np.ndarray:
    """(m+1) x (n+1) weights indexed by lattice coordinates, NaN outside the range."""
    variant = Variant(variant)
    if variant is Variant.NORTHEAST:
        raise LppError("use northeast_weights for the northeast variant")
    params = _check_params(variant, params)
    m, n = field.m, field.n
    w = np.full((m + 1, n + 1), np.nan)
    w[1:, 1:] = field.bulk
    hor, ver = boundary_weights(field, params)
    if variant in (Variant.HOR, Variant.TWO_SIDED):
        w[1:, 0] = hor
    if variant in (Variant.VER, Variant.TWO_SIDED):
        w[0, 1:] = ver
    if variant is Variant.TWO_SIDED:
        w[0, 0] = 0.0
    return w


def lpp_from(weights: np.ndarray, start: tuple[int, int] = (0, 0),
             backpointers: bool = True) -> LppGrid:
    """G_{start, v} for every v >= start, for arbitrary real weights indexed [i, j]."""
    w = np.asarray(weights, dtype=np.float64)
    si, sj = start
    if not (0 <= si < w.shape[0] and 0 <= sj < w.shape[1]):
        raise LppError(f"start {start} outside the weight table")
    values = np.full(w.shape, np.nan)
    back = np.full(w.shape, OUTSIDE, dtype=np.int8)
    ties = _dp_table(w, si, sj, values, back)
    return LppGrid(Variant.BULK, None, values, back if backpointers else None, int(ties))


def lpp_values(field: WeightField, variant: Variant | str,
               params: BoundaryParam | None = None, mode: str = "full",
               probes: Iterable[tuple[int, int]] = (),
               budget_bytes: int = DEFAULT_BUDGET_BYTES) -> LppGrid | RollingResult:
    """Last-passage values of ``field`` for one variant.

    ``mode="full"`` returns an :class:`LppGrid` with backpointers.
    ``mode="rolling"`` keeps a single row and returns the top row G(., n)
    plus the requested probe vertices.
    """
    variant = Variant(variant)
    if variant is Variant.NORTHEAST:
        if mode != "full":
            raise LppError("northeast values are only available in full mode")
        if not isinstance(params, (int, float)):
            raise LppError("northeast variant needs a scalar u")
        return northeast_values(field, float(params))
    params = _check_params(variant, params)
    w = weight_table(field, variant, params)
    si, sj = variant.start
    if mode == "full":
        need = w.size * 17
        if need > budget_bytes:
            raise FieldBudgetError(need, budget_bytes)
        values = np.full(w.shape, np.nan)
        back = np.full(w.shape, OUTSIDE, dtype=np.int8)
        ties = _dp_table(w, si, sj, values, back)
        return LppGrid(variant, params, values, back, int(ties))
    if mode == "rolling":
        probes = list(probes)
        for p in probes:
            if not (si <= p[0] < w.shape[0] and sj <= p[1] < w.shape[1]):
                raise LppError(f"probe {p} outside the {variant.value} index range")
        pi = np.array([p[0] for p in probes], dtype=np.int64)
        pj = np.array([p[1] for p in probes], dtype=np.int64)
        out = np.full(len(probes), np.nan)
        row = _dp_rolling(w, si, sj, pi, pj, out)
        return RollingResult(variant, row, {p: float(v) for p, v in zip(probes, out)})
    raise LppError(f"unknown mode {mode!r}")


def lpp_bruteforce(field: WeightField, variant: Variant | str,
                   params: BoundaryParam | None = None,
                   target: tuple[int, int] | None = None) -> float:
    """Maximum over every up-right path, by enumeration."""
    variant = Variant(variant)
    if variant is Variant.NORTHEAST:
        w = northeast_weights(field, float(params))
        full = np.full((field.m + 2, field.n + 2), np.nan)
        full[1:, 1:] = w
        si, sj = target if target is not None else (1, 1)
        # enumerate on the point-reflected table so sums accumulate from the
        # corner, in the same order as the reversed DP
        M, N = field.m + 1, field.n + 1
        flipped = full[::-1, ::-1]
        return _enumerate(flipped, (0, 0), (M - si, N - sj))
    w = weight_table(field, variant, params)
    if target is None:
        target = (field.m, field.n)
    return _enumerate(w, variant.start, target)


def _enumerate(w: np.ndarray, start: tuple[int, int], end: tuple[int, int]) -> float:
    a, b = end[0] - start[0], end[1] - start[1]
    if a < 0 or b < 0:
        raise LppError(f"target {end} is not above-right of start {start}")
    if a + b > BRUTEFORCE_MAX_STEPS:
        raise LppSizeError(f"{a + b} steps exceeds the brute-force cap {BRUTEFORCE_MAX_STEPS}")
    best = -math.inf
    for rights in itertools.combinations(range(a + b), a):
        i, j = start
        total = w[i, j]
        rset = set(rights)
        for step in range(a + b):
            if step in rset:
                i += 1
            else:
                j += 1
            total += w[i, j]
        best = max(best, total)
    return float(best)


# ------------------------------------------------------------ path utilities


def geodesic_backtrack(grid: LppGrid, target: tuple[int, int]) -> Geodesic:
    """Maximizing path to ``target`` (or, on a northeast grid, from it to the corner)."""
    if grid.backpointers is None:
        raise LppError("grid has no backpointers (rolling mode?)")
    back = grid.backpointers
    i, j = target
    if not (0 <= i < back.shape[0] and 0 <= j < back.shape[1]) or back[i, j] == OUTSIDE:
        raise LppError(f"target {target} outside the grid's index range")
    path = [(i, j)]
    if grid.variant is Variant.NORTHEAST:
        while back[i, j] != START:
            if back[i, j] == FROM_LEFT:
                i += 1
            else:
                j += 1
            path.append((i, j))
        return Geodesic(tuple(path))
    while back[i, j] != START:
        if back[i, j] == FROM_LEFT:
            i -= 1
        else:
            j -= 1
        path.append((i, j))
    return Geodesic(tuple(reversed(path)))


def exit_points(geodesic: Geodesic) -> ExitPoints:
    start = geodesic.vertices[0]
    if start[0] != 0 and start[1] != 0:
        raise LppError("exit points need a geodesic starting on a boundary axis")
    z_hor = max((i for i, j in geodesic.vertices if j == 0), default=0)
    z_ver = max((j for i, j in geodesic.vertices if i == 0), default=0)
    return ExitPoints(int(z_hor), int(z_ver))


def increment_profile(grid: LppGrid, base: tuple[int, int], axis: str, count: int) -> np.ndarray:
    """G(base + k e) - G(base + (k-1) e) for k = 1..count; axis "hor" or "ver"."""
    if axis not in ("hor", "ver"):
        raise LppError(f"axis must be 'hor' or 'ver', got {axis!r}")
    i, j = base
    if axis == "hor":
        seg = grid.values[i:i + count + 1, j] if i + count < grid.values.shape[0] else None
    else:
        seg = grid.values[i, j:j + count + 1] if j + count < grid.values.shape[1] else None
    if seg is None or i < 0 or j < 0 or np.isnan(seg).any():
        raise LppError(f"increments from {base} along {axis} leave the grid")
    return np.diff(seg)


def northeast_values(field: WeightField, u: float) -> LppGrid:
    """G~ from every v in [1..m+1] x [1..n+1] to the corner (m+1, n+1)."""
    w = northeast_weights(field, u)
    M, N = w.shape
    values = np.full((M + 1, N + 1), np.nan)
    back = np.full((M + 1, N + 1), OUTSIDE, dtype=np.int8)
    inner_v = np.empty((M, N))
    inner_b = np.empty((M, N), dtype=np.int8)
    ties = _dp_reverse(w, inner_v, inner_b)
    values[1:, 1:] = inner_v
    back[1:, 1:] = inner_b
    return LppGrid(Variant.NORTHEAST, float(u), values, back, int(ties))


def dump_grid_csv(grid: LppGrid, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["i", "j", "G"])
        for (i, j), val in np.ndenumerate(grid.values):
            if not math.isnan(val):
                out.writerow([i, j, repr(float(val))])
