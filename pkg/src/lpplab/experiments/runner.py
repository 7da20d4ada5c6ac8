"""Result records, verdicts, the replica pool and result persistence."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from ..estimators import write_summary_csv
from ..randfield import SeedSpec, stream_keys
from ..sweep import Model, SweepResult, sweep
from .config import ExperimentConfig

__all__ = [
    "SCHEMA_VERSION",
    "Check",
    "Verdict",
    "ExperimentResult",
    "ResultExistsError",
    "ReproductionError",
    "pmap",
    "family_sweep",
    "persist",
]

SCHEMA_VERSION = 1
# replicas per pool task; fixed so that chunking never depends on worker count
TASK_REPLICAS = 256


class ResultExistsError(FileExistsError):
    pass


class ReproductionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Check:
    """One inequality ``lo <= value <= hi``; margin is the distance to the nearer edge."""

    name: str
    value: float
    lo: float = -math.inf
    hi: float = math.inf

    @property
    def margin(self) -> float:
        if math.isnan(self.value):
            return -math.inf
        return min(self.value - self.lo, self.hi - self.value)

    @property
    def passed(self) -> bool:
        return bool(self.margin >= 0)

    def to_dict(self) -> dict:
        return {"name": self.name, "value": _clean(self.value), "lo": _clean(self.lo),
                "hi": _clean(self.hi), "margin": _clean(self.margin), "passed": self.passed}


@dataclass
class Verdict:
    criterion: str
    passed: bool
    margin: float
    checks: list[Check] = field(default_factory=list)
    skipped: str | None = None

    @classmethod
    def from_checks(cls, criterion: str, checks: Sequence[Check]) -> "Verdict":
        if not checks:
            raise ValueError(f"criterion {criterion} has no checks")
        margin = min(c.margin for c in checks)
        return cls(criterion, all(c.passed for c in checks), float(margin), list(checks))

    @classmethod
    def skip(cls, criterion: str, reason: str) -> "Verdict":
        return cls(criterion, False, math.nan, [], f"skipped: {reason}")

    def line(self) -> str:
        if self.skipped:
            return f"CRITERION {self.criterion} SKIP {self.skipped}"
        status = "PASS" if self.passed else "FAIL"
        return f"CRITERION {self.criterion} {status} margin={self.margin:.6g}"

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "passed": bool(self.passed), "margin": _clean(self.margin),
                "skipped": self.skipped, "checks": [c.to_dict() for c in self.checks]}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    stats: dict[str, Any] = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)
    slopes: dict[str, dict] = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)
    wall_clock: float = 0.0
    cells: int = 0
    replicas: int = 0

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, criterion: str) -> Verdict:
        for v in self.verdicts:
            if v.criterion == criterion:
                return v
        raise KeyError(criterion)

    def add_row(self, N, param, statistic, value, lo=None, hi=None, replicas=None) -> None:
        self.rows.append({
            "experiment": self.config.name, "N": N, "param": param, "statistic": statistic,
            "value": _fmt(value), "lo": _fmt(lo), "hi": _fmt(hi),
            "replicas": "" if replicas is None else int(replicas),
            "seed": self.config.master_seed,
        })

    def add_slope(self, name: str, fit) -> None:
        self.slopes[name] = {"slope": fit.slope, "intercept": fit.intercept,
                             "r2": fit.r2, "slope_se": fit.slope_se}

    def payload(self) -> dict:
        """Everything except timing; identical across reruns and worker counts."""
        cfg = self.config.to_dict()
        for volatile in ("worker_count", "output", "on_existing"):
            cfg.pop(volatile, None)
        return {
            "schema": SCHEMA_VERSION,
            "experiment": self.config.name,
            "config": cfg,
            "stats": _clean(self.stats),
            "slopes": _clean(self.slopes),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "passed": bool(self.passed),
        }

    def to_json(self) -> dict:
        out = self.payload()
        out["timing"] = {
            "wall_clock_s": self.wall_clock,
            "replicas": self.replicas,
            "cells": self.cells,
            "replicas_per_s": self.replicas / self.wall_clock if self.wall_clock > 0 else None,
            "cells_per_s": self.cells / self.wall_clock if self.wall_clock > 0 else None,
            "worker_count": self.config.worker_count,
        }
        return out


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    return obj


# ------------------------------------------------------------------- pool


def pmap(fn: Callable, tasks: Iterable[tuple], workers: int) -> list:
    """Ordered map of ``fn(*task)``; results come back in task order."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _sweep_task(master_seed: int, family: str, r0: int, r1: int, m: int, n: int,
                models: tuple[Model, ...], probes: tuple[tuple[int, int], ...]) -> SweepResult:
    fam = SeedSpec(master_seed, family)
    keys = stream_keys([fam.replica(r) for r in range(r0, r1)])
    return sweep(keys, m, n, models, probes)


def family_sweep(cfg: ExperimentConfig, family: str, replicas: int, m: int, n: int,
                 models: Sequence[Model], probes: Sequence[tuple[int, int]] = ()) -> SweepResult:
    """Sweep replicas 0..replicas-1 of the seed family ``family`` through the pool."""
    tasks = [(cfg.master_seed, family, r0, min(replicas, r0 + TASK_REPLICAS), m, n,
              tuple(models), tuple(probes)) for r0 in range(0, replicas, TASK_REPLICAS)]
    parts = pmap(_sweep_task, tasks, cfg.worker_count)
    return SweepResult(*(np.concatenate([getattr(p, f) for p in parts])
                         for f in SweepResult.__dataclass_fields__))


# ------------------------------------------------------------ persistence


def persist(result: ExperimentResult, out_dir: str | Path, on_existing: str = "error") -> Path:
    """Write ``<name>.json`` and ``<name>.csv`` under ``out_dir``.

    If the files already exist, ``on_existing="error"`` refuses to touch
    them and ``"verify"`` checks that the new run reproduces them exactly
    (timing excluded).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jpath = out / f"{result.config.name}.json"
    cpath = out / f"{result.config.name}.csv"
    text = json.dumps(result.to_json(), indent=2, sort_keys=True)
    if jpath.exists() or cpath.exists():
        if on_existing != "verify":
            raise ResultExistsError(f"{jpath} exists; pass on_existing=verify to check reproduction")
        _verify_existing(result, jpath, cpath)
        return jpath
    tmp = cpath.with_suffix(".csv.tmp")
    write_summary_csv(result.rows, tmp)
    tmp.replace(cpath)
    tmp = jpath.with_suffix(".json.tmp")
    tmp.write_text(text + "\n")
    tmp.replace(jpath)
    return jpath


def _verify_existing(result: ExperimentResult, jpath: Path, cpath: Path) -> None:
    try:
        old = json.loads(jpath.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ReproductionError(f"cannot read {jpath}: {exc}") from None
    old.pop("timing", None)
    new = json.loads(json.dumps(result.payload(), sort_keys=True))
    if json.dumps(old, sort_keys=True) != json.dumps(new, sort_keys=True):
        raise ReproductionError(f"{jpath} differs from the rerun")
    tmp = cpath.with_suffix(".csv.check")
    write_summary_csv(result.rows, tmp)
    try:
        if not cpath.exists() or tmp.read_bytes() != cpath.read_bytes():
            raise ReproductionError(f"{cpath} differs from the rerun")
    finally:
        tmp.unlink(missing_ok=True)
