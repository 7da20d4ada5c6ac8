"""Reproducible random environments.

Every random number in the package is addressed by a site: a counter-based
Philox4x32-10 generator is keyed by a hash of ``(master_seed, experiment_id,
replica_index)`` and fed a counter built from ``(column block, row, layer)``.
So the weight at a lattice site never depends on grid extents, batch layout
or worker count, and a field of size (m, n) is a corner of any larger field
with the same seed.

Exponential weights are ``-ln U`` with ``U`` strictly inside (0, 1); boundary
layers keep their uniforms so a single field serves every boundary rate
through the monotone coupling ``-ln U / rate``.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numba as nb
import numpy as np

from .analytic import BoundaryParam, DomainError

__all__ = [
    "Layer",
    "SeedSpec",
    "derive_seed",
    "stream_key",
    "stream_keys",
    "uniform_row",
    "uniform_rows",
    "WeightField",
    "FieldBudgetError",
    "sample_field",
    "field_from_arrays",
    "boundary_weights",
    "northeast_weights",
    "tilted_exp_stream",
    "uniform_stream",
    "dump_field",
    "load_field",
    "DEFAULT_BUDGET_BYTES",
]

DEFAULT_BUDGET_BYTES = 1 << 30


class Layer(IntEnum):
    BULK = 0
    HOR = 1
    VER = 2
    NE_TOP = 3
    NE_RIGHT = 4
    STREAM = 5
    BOOTSTRAP = 6
    AUX = 7


_U64 = (1 << 64) - 1


def derive_seed(master_seed: int, experiment_id: str, replica_index: int) -> int:
    """128-bit stream key: blake2b of a length-prefixed encoding of the triple."""
    if not (0 <= master_seed <= _U64):
        raise ValueError("master_seed must be an unsigned 64-bit integer")
    if replica_index < 0:
        raise ValueError("replica_index must be nonnegative")
    eid = experiment_id.encode("utf-8")
    payload = b"lpplab/v1" + struct.pack("<QQI", master_seed, replica_index, len(eid)) + eid
    return int.from_bytes(hashlib.blake2b(payload, digest_size=16).digest(), "little")


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    experiment_id: str
    replica_index: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.master_seed <= _U64):
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.replica_index < 0:
            raise ValueError("replica_index must be nonnegative")

    @property
    def key(self) -> int:
        return derive_seed(self.master_seed, self.experiment_id, self.replica_index)

    def replica(self, index: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.experiment_id, index)


def stream_key(key: int) -> np.ndarray:
    """Split a 128-bit key into the three 32-bit words the kernel uses.

    Words 0 and 1 form the Philox key; word 2 fills the last counter slot.
    The top 32 bits are dropped, leaving 96 bits of stream identity.
    """
    return np.array(
        [key & 0xFFFFFFFF, (key >> 32) & 0xFFFFFFFF, (key >> 64) & 0xFFFFFFFF],
        dtype=np.uint32,
    )


def stream_keys(specs) -> np.ndarray:
    return np.stack([stream_key(s.key) for s in specs]) if specs else np.zeros((0, 3), np.uint32)


# ----------------------------------------------------------------- the kernel

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_LO = np.uint64(0xFFFFFFFF)
_SH = np.uint64(32)
_SH11 = np.uint64(11)
_SCALE = 2.0**-53


@nb.njit(inline="always", cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        if r > 0:
            k0 = np.uint32(k0 + _W0)
            k1 = np.uint32(k1 + _W1)
        p0 = _M0 * np.uint64(c0)
        p1 = _M1 * np.uint64(c2)
        c0, c1, c2, c3 = (
            np.uint32(np.uint32(p1 >> _SH) ^ c1 ^ k0),
            np.uint32(p1 & _LO),
            np.uint32(np.uint32(p0 >> _SH) ^ c3 ^ k1),
            np.uint32(p0 & _LO),
        )
    return c0, c1, c2, c3


@nb.njit(inline="always", cache=True)
def _to_unit(hi, lo):
    x = (np.uint64(hi) << _SH) | np.uint64(lo)
    return (float(x >> _SH11) + 0.5) * _SCALE


@nb.njit(cache=True)
def _fill_row(out, key, layer, row, start):
    """out[t] = uniform at site index start + t (0-based) of (layer, row)."""
    k0, k1, tag = key[0], key[1], key[2]
    r = np.uint32(row)
    lay = np.uint32(layer)
    count = out.shape[0]
    t = 0
    site = start
    if site & 1 and count > 0:
        a, b, c, d = philox4x32(np.uint32(site >> 1), r, lay, tag, k0, k1)
        out[0] = _to_unit(c, d)
        t = 1
        site += 1
    while t + 1 < count:
        a, b, c, d = philox4x32(np.uint32(site >> 1), r, lay, tag, k0, k1)
        out[t] = _to_unit(a, b)
        out[t + 1] = _to_unit(c, d)
        t += 2
        site += 2
    if t < count:
        a, b, c, d = philox4x32(np.uint32(site >> 1), r, lay, tag, k0, k1)
        out[t] = _to_unit(a, b)


@nb.njit(cache=True)
def _fill_rows(out, keys, layer, row0, start):
    """out[r, i, t] = uniform for replica r, row row0 + i, site start + t."""
    for q in range(out.shape[0]):
        for i in range(out.shape[1]):
            _fill_row(out[q, i], keys[q], layer, row0 + i, start)


def uniform_row(key: int, layer: int, row: int, count: int, start: int = 0) -> np.ndarray:
    out = np.empty(count, dtype=np.float64)
    _fill_row(out, stream_key(key), int(layer), int(row), int(start))
    return out


def uniform_rows(keys: np.ndarray, layer: int, row0: int, nrows: int, count: int) -> np.ndarray:
    """Uniform block of shape (len(keys), nrows, count) for consecutive rows."""
    out = np.empty((keys.shape[0], nrows, count), dtype=np.float64)
    _fill_rows(out, keys, int(layer), int(row0), 0)
    return out


# ---------------------------------------------------------------- the field


class FieldBudgetError(MemoryError):
    def __init__(self, required: int, allowed: int):
        super().__init__(f"field needs {required} bytes, budget allows {allowed}")
        self.required = required
        self.allowed = allowed


@dataclass(frozen=True, eq=False)
class WeightField:
    """Coupled environment on [1..m] x [1..n] plus boundary and northeast layers.

    ``bulk[i-1, j-1]`` is the Exp(1) weight at site (i, j). ``hor_uniforms[i-1]``
    drives the horizontal boundary site (i, 0), ``ver_uniforms[j-1]`` the
    vertical site (0, j). ``ne_top_uniforms[i-1]`` drives (i, n+1) and
    ``ne_right_uniforms[j-1]`` drives (m+1, j).
    """

    spec: SeedSpec
    m: int
    n: int
    bulk: np.ndarray
    hor_uniforms: np.ndarray
    ver_uniforms: np.ndarray
    ne_top_uniforms: np.ndarray
    ne_right_uniforms: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.bulk, self.hor_uniforms, self.ver_uniforms,
                    self.ne_top_uniforms, self.ne_right_uniforms):
            arr.setflags(write=False)

    @property
    def ne_uniforms(self) -> tuple[np.ndarray, np.ndarray]:
        return self.ne_top_uniforms, self.ne_right_uniforms

    def same_as(self, other: "WeightField") -> bool:
        return (
            self.spec == other.spec
            and (self.m, self.n) == (other.m, other.n)
            and all(
                np.array_equal(a, b)
                for a, b in zip(self._arrays(), other._arrays())
            )
        )

    def _arrays(self):
        return (self.bulk, self.hor_uniforms, self.ver_uniforms,
                self.ne_top_uniforms, self.ne_right_uniforms)


def field_from_arrays(bulk, hor_uniforms=None, ver_uniforms=None,
                      ne_top_uniforms=None, ne_right_uniforms=None,
                      spec: SeedSpec | None = None) -> WeightField:
    """Hand-built field, mainly for tests. Missing uniform layers default to 1/2."""
    bulk = np.array(bulk, dtype=np.float64, ndmin=2)
    m, n = bulk.shape

    def layer(arr, count):
        if arr is None:
            return np.full(count, 0.5)
        arr = np.array(arr, dtype=np.float64)
        if arr.shape != (count,) or not np.all((arr > 0) & (arr < 1)):
            raise DomainError("uniform layers must have the right length and lie in (0,1)")
        return arr

    return WeightField(
        spec or SeedSpec(0, "manual"), m, n, bulk,
        layer(hor_uniforms, m), layer(ver_uniforms, n),
        layer(ne_top_uniforms, m), layer(ne_right_uniforms, n),
    )


def field_bytes(m: int, n: int) -> int:
    return 8 * (m * n + 2 * (m + n))


def sample_field(spec: SeedSpec, m: int, n: int,
                 budget_bytes: int = DEFAULT_BUDGET_BYTES) -> WeightField:
    if m < 1 or n < 1:
        raise DomainError(f"extents must be positive, got ({m}, {n})")
    need = field_bytes(m, n)
    if need > budget_bytes:
        raise FieldBudgetError(need, budget_bytes)
    keys = stream_key(spec.key)[None, :]
    # bulk is generated row by row (row j holds sites (1..m, j)) and stored [i-1, j-1]
    u = uniform_rows(keys, Layer.BULK, 1, n, m)[0]
    # log on the contiguous block so values match the batch kernels bit for bit
    bulk = np.ascontiguousarray((-np.log(u)).T)

    def line(layer: Layer, count: int) -> np.ndarray:
        return uniform_rows(keys, layer, 0, 1, count)[0, 0]

    return WeightField(
        spec=spec, m=m, n=n, bulk=bulk,
        hor_uniforms=line(Layer.HOR, m),
        ver_uniforms=line(Layer.VER, n),
        ne_top_uniforms=line(Layer.NE_TOP, m),
        ne_right_uniforms=line(Layer.NE_RIGHT, n),
    )


def _scaled_exp(uniforms: np.ndarray, rate: float) -> np.ndarray:
    if math.isinf(rate):
        return np.zeros_like(uniforms)
    return -np.log(uniforms) / rate


def boundary_weights(field: WeightField, params: BoundaryParam) -> tuple[np.ndarray, np.ndarray]:
    """(hor, ver) with hor[i-1] ~ Exp(w) at (i, 0) and ver[j-1] ~ Exp(1-z) at (0, j)."""
    return _scaled_exp(field.hor_uniforms, params.hor_rate), _scaled_exp(
        field.ver_uniforms, params.ver_rate
    )


def northeast_weights(field: WeightField, u: float) -> np.ndarray:
    """Weights on [1..m+1] x [1..n+1], stored [i-1, j-1].

    Top row (i, n+1) is Exp(u), right column (m+1, j) is Exp(1-u), the corner
    (m+1, n+1) is zero and the interior is the bulk itself.
    """
    if not (0.0 < u < 1.0):
        raise DomainError(f"u must lie in (0,1), got {u!r}")
    m, n = field.m, field.n
    out = np.empty((m + 1, n + 1))
    out[:m, :n] = field.bulk
    out[:m, n] = _scaled_exp(field.ne_top_uniforms, u)
    out[m, :n] = _scaled_exp(field.ne_right_uniforms, 1.0 - u)
    out[m, n] = 0.0
    return out


def uniform_stream(spec: SeedSpec, count: int, row: int = 0,
                   layer: Layer = Layer.STREAM) -> np.ndarray:
    return uniform_row(spec.key, layer, row, count)


def tilted_exp_stream(spec: SeedSpec, n: int, mu: float, row: int = 0) -> np.ndarray:
    """n i.i.d. Exp(1 - mu) draws; mu = 0 gives the plain Exp(1) stream."""
    if not (mu < 1):
        raise DomainError(f"mu must be below 1, got {mu!r}")
    return -np.log(uniform_stream(spec, n, row)) / (1.0 - mu)


# ------------------------------------------------------------------- dumping

_MAGIC = b"LPPFIELD"


def dump_field(field: WeightField, path: str | Path) -> None:
    """Binary dump: magic, u32 header length, JSON header, little-endian f64 payload.

    Payload order: bulk (row-major, shape (m, n)), hor, ver, ne_top, ne_right.
    """
    header = json.dumps({
        "m": field.m, "n": field.n,
        "master_seed": field.spec.master_seed,
        "experiment_id": field.spec.experiment_id,
        "replica_index": field.spec.replica_index,
    }).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arr in field._arrays():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_field(path: str | Path) -> WeightField:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError(f"{path}: not a field dump")
    (hlen,) = struct.unpack("<I", raw[8:12])
    meta = json.loads(raw[12:12 + hlen])
    m, n = meta["m"], meta["n"]
    data = np.frombuffer(raw[12 + hlen:], dtype="<f8").astype(np.float64)
    sizes = [m * n, m, n, m, n]
    if data.size != sum(sizes):
        raise ValueError(f"{path}: payload size mismatch")
    parts = np.split(data, np.cumsum(sizes)[:-1])
    spec = SeedSpec(meta["master_seed"], meta["experiment_id"], meta["replica_index"])
    return WeightField(spec, m, n, parts[0].reshape(m, n).copy(), *(p.copy() for p in parts[1:]))
