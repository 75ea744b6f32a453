"""Run configuration: INI file sections overridden by command-line flags."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError

# hyperparameter grid searched for the classical MLP
MLP_HIDDEN_GRID = (
    (2048, 1024, 512, 256, 128),
    (2048, 1024, 512, 256),
    (2048, 1024, 512),
    (1024, 1024, 1024),
    (1024, 512, 256, 128),
    (1024, 512, 256),
)
MLP_DROPOUT_GRID = (0.1, 0.2)
FIXED_TRAINING = {"batch_size": 128, "lr": 0.001, "epochs": 300}
QUBIT_CHOICES = (4, 9)
STRATEGIES = ("scratch", "finetune", "frozen")

# INI section for each field
_SECTIONS = {
    "task": "run",
    "data": "paths",
    "backbone": "paths",
    "models": "paths",
    "noise_catalog": "paths",
    "out": "paths",
    "hidden": "model",
    "dropout": "model",
    "qubits": "model",
    "depth": "model",
    "init_scale": "model",
    "radius": "features",
    "nbits": "features",
    "batch_size": "train",
    "lr": "train",
    "epochs": "train",
    "seed": "train",
    "folds": "train",
    "threads": "train",
    "strategy": "hqnn",
    "noise": "hqnn",
}


def grid_presets():
    """Every (hidden layers, dropout) pair of the MLP search grid."""
    return [(h, d) for h in MLP_HIDDEN_GRID for d in MLP_DROPOUT_GRID]


@dataclass
class RunConfig:
    task: str = "task"
    data: Optional[str] = None
    backbone: Optional[str] = None
    models: Optional[str] = None
    noise_catalog: Optional[str] = None
    out: str = "out"
    hidden: tuple = (1024, 512, 256)
    dropout: float = 0.1
    qubits: int = 4
    depth: int = 2
    init_scale: float = 0.1
    radius: int = 3
    nbits: int = 1024
    batch_size: int = 128
    lr: float = 0.001
    epochs: int = 300
    seed: int = 0
    folds: int = 5
    threads: int = 1
    strategy: str = "scratch"
    noise: str = "none"

    def update(self, values: dict) -> "RunConfig":
        """Apply overrides; ``None`` values are ignored so unset flags never win."""
        types = {f.name: f.type for f in fields(self)}
        for key, raw in values.items():
            if raw is None or key not in types:
                continue
            setattr(self, key, _coerce(key, raw))
        return self

    def validate(self, need_data: bool = True) -> "RunConfig":
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.qubits not in QUBIT_CHOICES:
            raise ConfigurationError(f"qubits must be one of {QUBIT_CHOICES}, got {self.qubits}")
        if self.depth < 0 or self.epochs < 0 or self.batch_size < 1 or self.folds < 2 or self.threads < 1:
            raise ConfigurationError("depth/epochs must be >= 0, batch_size >= 1, folds >= 2, threads >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.strategy != "scratch" and not self.backbone:
            raise ConfigurationError(f"strategy {self.strategy!r} requires a backbone checkpoint path")
        for name in ("backbone", "noise_catalog") + (("data",) if need_data else ()):
            value = getattr(self, name)
            if need_data and name == "data" and not value:
                raise ConfigurationError("no data file given (--data or [paths] data)")
            if value and not Path(value).exists():
                raise ConfigurationError(f"{name} path does not exist: {value}")
        return self

    def as_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def _coerce(key: str, raw):
    if key == "hidden":
        if isinstance(raw, str):
            parts = [p for p in raw.replace("-", ",").replace(" ", ",").split(",") if p]
            try:
                return tuple(int(p) for p in parts)
            except ValueError:
                raise ConfigurationError(f"hidden must be a list of integers, got {raw!r}") from None
        return tuple(int(v) for v in raw)
    default = RunConfig.__dataclass_fields__[key].default
    try:
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {raw!r}") from None
    return str(raw)


def load_config(path: Optional[str | Path]) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from None
    if not read:
        raise ConfigurationError(f"config file not found: {path}")
    values = {}
    for key, section in _SECTIONS.items():
        if parser.has_option(section, key):
            values[key] = parser.get(section, key)
    known = set(_SECTIONS.values())
    for section in parser.sections():
        if section not in known:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key in parser.options(section):
            if _SECTIONS.get(key) != section:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
    return cfg.update(values)
