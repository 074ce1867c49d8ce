"""Experiment configuration and its ``key = value`` file format.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment and blank lines are ignored.  Keys are the field names of
:class:`ExperimentConfig`.  ``none`` (any case) clears an optional value.
Example::

    # configs/iris.cfg
    dataset = iris
    pipeline = delala
    l = 12
    w = 0.5
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError

PIPELINES = ("delala", "multimetric", "lapoleaf", "random-baseline")
XOR_NORMALIZATIONS = ("minmax", "zscore", "rank")


@dataclass
class ExperimentConfig:
    dataset: str = "iris"
    pipeline: str = "delala"
    normalize: bool = True
    # leading forest
    sigma: Optional[float] = None
    sigma_percentile: float = 2.0
    alpha_lodog: float = 0.5
    n_max: Optional[int] = None
    # selection
    w: float = 0.5
    k: int = 3
    l: Optional[int] = None
    xor_normalization: str = "minmax"
    # KLMCA
    kernel_bandwidth: Optional[float] = None
    kernel_percentile: float = 50.0
    p: Optional[int] = None
    c: float = 1.0
    lam: float = 1e-3
    max_iters: int = 100
    tol: float = 1e-7
    # multi-metric
    c_tilde: int = 5
    max_depth: int = 3
    # run control
    seed: int = 42
    repeats: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        if self.xor_normalization not in XOR_NORMALIZATIONS:
            raise ConfigError(f"xor_normalization must be one of {XOR_NORMALIZATIONS}")
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if not 0 < self.sigma_percentile <= 100:
            raise ConfigError("sigma_percentile must lie in (0, 100]")
        if not 0 < self.kernel_percentile <= 100:
            raise ConfigError("kernel_percentile must lie in (0, 100]")
        if self.kernel_bandwidth is not None and not self.kernel_bandwidth > 0:
            raise ConfigError("kernel_bandwidth must be positive")
        if not 0 < self.alpha_lodog < 1:
            raise ConfigError("alpha_lodog must lie in (0, 1)")
        if not 0 <= self.w <= 1:
            raise ConfigError("w must lie in [0, 1]")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.l is not None and self.l < 1:
            raise ConfigError("l must be >= 1")
        if self.p is not None and self.p < 1:
            raise ConfigError("p must be >= 1")
        if not self.c > 0 or not self.lam > 0:
            raise ConfigError("c and lam must be positive")
        if self.max_iters < 1 or self.repeats < 1:
            raise ConfigError("max_iters and repeats must be >= 1")
        if self.n_max is not None and self.n_max < 1:
            raise ConfigError("n_max must be >= 1")
        if self.c_tilde < 1 or self.max_depth < 1:
            raise ConfigError("c_tilde and max_depth must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name: str, raw):
    f = _FIELDS.get(name)
    if f is None:
        raise ConfigError(f"unknown config key {name!r}")
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    typ = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    optional = typ.startswith("Optional")
    if optional and text.lower() in ("none", ""):
        return None
    base = typ.removeprefix("Optional[").rstrip("]")
    try:
        if base == "bool":
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if base == "int":
            return int(text)
        if base == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return text


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = _coerce(key, val)
    return values


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (None values skipped)."""
    values = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        values.update(parse_config_text(p.read_text(encoding="utf-8")))
    for k, v in overrides.items():
        if v is not None:
            values[k] = _coerce(k, v)
    return ExperimentConfig(**values).validate()


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        lines.append(f"{k} = {'none' if v is None else v}")
    return "\n".join(lines) + "\n"
