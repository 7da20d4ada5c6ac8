"""Experiment configuration: defaults, validation, file loading and overrides."""

from __future__ import annotations

import copy
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_override",
    "load_config_file",
    "OUT_ENV",
    "default_output_dir",
]

OUT_ENV = "LPPLAB_OUT"
_U64 = (1 << 64) - 1
_TOP_LEVEL = ("name", "ladder", "replicas", "params", "master_seed",
              "worker_count", "output", "on_existing")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def default_output_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "lpplab-results"))


@dataclass
class ExperimentConfig:
    """What to run, where, and how many replicas.

    ``ladder`` holds diagonal sizes N (vertex (N, N)); experiments that need
    other vertices take them from ``params``. ``replicas`` is either one
    count for every ladder point or one count per point.
    """

    name: str
    ladder: list[int] = field(default_factory=list)
    replicas: list[int] = field(default_factory=list)
    params: dict[str, Any] = field(default_factory=dict)
    master_seed: int = 20240101
    worker_count: int = 1
    output: str | None = None
    on_existing: str = "error"

    def replicas_at(self, index: int) -> int:
        if len(self.replicas) == 1:
            return self.replicas[0]
        return self.replicas[index]

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self, min_replicas: int = 100) -> "ExperimentConfig":
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("name", "must be a nonempty string")
        for i, N in enumerate(self.ladder):
            if not isinstance(N, int) or isinstance(N, bool) or N < 1:
                raise ConfigError(f"ladder[{i}]", f"must be a positive integer, got {N!r}")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigError("ladder", "must be strictly increasing")
        if not self.replicas:
            raise ConfigError("replicas", "must not be empty")
        if len(self.replicas) not in (1, max(1, len(self.ladder))):
            raise ConfigError("replicas", "needs one count or one count per ladder point")
        for i, r in enumerate(self.replicas):
            if not isinstance(r, int) or isinstance(r, bool) or r < min_replicas:
                raise ConfigError(f"replicas[{i}]", f"must be an integer >= {min_replicas}, got {r!r}")
        if not isinstance(self.master_seed, int) or not (0 <= self.master_seed <= _U64):
            raise ConfigError("master_seed", "must be an unsigned 64-bit integer")
        if not isinstance(self.worker_count, int) or self.worker_count < 1:
            raise ConfigError("worker_count", "must be a positive integer")
        if self.on_existing not in ("error", "verify"):
            raise ConfigError("on_existing", "must be 'error' or 'verify'")
        if not isinstance(self.params, dict):
            raise ConfigError("params", "must be a mapping")
        return self

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], defaults: "ExperimentConfig | None" = None
                     ) -> "ExperimentConfig":
        """Build from a parsed mapping, layered over ``defaults``.

        Unknown top-level keys are errors; unknown ``params`` keys are errors
        when ``defaults`` declares the parameter set.
        """
        base = copy.deepcopy(defaults) if defaults is not None else cls(name=str(data.get("name", "")))
        for key, value in data.items():
            if key not in _TOP_LEVEL:
                raise ConfigError(key, "unknown configuration key")
            if key == "params":
                if not isinstance(value, Mapping):
                    raise ConfigError("params", "must be a mapping")
                for pk, pv in value.items():
                    base.set_param(pk, pv, strict=defaults is not None)
            else:
                setattr(base, key, _coerce_top(key, value))
        return base

    def set_param(self, key: str, value: Any, strict: bool = True) -> None:
        if strict and key not in self.params:
            raise ConfigError(f"params.{key}", "unknown parameter for this experiment")
        old = self.params.get(key)
        if isinstance(old, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        self.params[key] = value

    def apply_override(self, key: str, value: Any) -> None:
        """``key`` is a top-level field, ``params.<name>`` or a bare parameter name."""
        if key.startswith("params."):
            self.set_param(key[len("params."):], value)
        elif key in _TOP_LEVEL:
            if key == "params":
                raise ConfigError("params", "override individual parameters instead")
            setattr(self, key, _coerce_top(key, value))
        elif key in self.params:
            self.set_param(key, value)
        else:
            raise ConfigError(key, "unknown configuration key")


def _coerce_top(key: str, value: Any) -> Any:
    if key in ("ladder", "replicas"):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, "must be a list of integers")
        return [_int_like(f"{key}[{i}]", v) for i, v in enumerate(value)]
    if key in ("master_seed", "worker_count"):
        return _int_like(key, value)
    if key == "output":
        return None if value is None else str(value)
    return value


def _int_like(path: str, value: Any) -> Any:
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(text, "empty override key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(key, f"cannot parse value {raw!r}: {exc}") from None
    return key, value


def load_config_file(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"malformed config: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a mapping")
    return data
