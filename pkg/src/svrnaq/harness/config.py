"""Run configurations: flat ``key = value`` files, presets and CLI overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

OPTIMIZERS = ("sgd", "adam", "svrg", "svrg2", "naq", "lnaq", "onaq", "olnaq", "svrnaq", "svrlnaq")
LIMITED_MEMORY = {"lnaq", "olnaq", "svrlnaq"}
MOMENTUM = {"naq", "lnaq", "onaq", "olnaq", "svrnaq", "svrlnaq"}
SYNTHETIC = ("synthetic-quadratic", "synthetic-regression")

PRESET_ENV = "SVRNAQ_PRESET_DIR"
_PACKAGE_PRESETS = Path(__file__).with_name("presets")

# keys holding per-optimizer values, written as e.g. ``alpha0.svrg2 = 0.03``
_PER_OPTIMIZER = ("mu", "alpha0", "normalize_direction")


class ConfigError(ValueError):
    pass


def _to_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _optional_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


@dataclass(frozen=True)
class RunConfig:
    dataset: str = "synthetic-regression"
    target_column: int = -1
    normalize: bool = True
    train_fraction: float = 0.8
    split_seed: int = 0
    network: str = ""
    output_activation: str = "linear"
    optimizer: str = "svrlnaq"
    batch_size: int = 32
    memory: int = 4
    mu: float = 0.95
    alpha0: float = 1.0
    svrg_alpha: float = 0.025
    lr: float | None = None
    normalize_direction: bool = False
    epochs: int = 20
    seed: int = 0
    out: str = "run.csv"
    synth_n: int = 200
    synth_d: int = 10
    synth_cond: float = 10.0
    synth_features: int = 11
    synth_seed: int = 0
    overrides: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def resolved(self, key: str):
        """Value of a per-optimizer key for ``self.optimizer``."""
        raw = dict(self.overrides).get(f"{key}.{self.optimizer}")
        if raw is None:
            return getattr(self, key)
        return _to_bool(raw) if key == "normalize_direction" else float(raw)

    def with_optimizer(self, name: str, out: str | None = None) -> "RunConfig":
        return replace(self, optimizer=name, out=out or self.out)

    def to_text(self) -> str:
        """One-line ``key=value; ...`` rendering used in metrics headers."""
        parts = []
        for f in fields(self):
            if f.name == "overrides":
                continue
            parts.append(f"{f.name}={getattr(self, f.name)}")
        parts += [f"{k}={v}" for k, v in self.overrides]
        return "; ".join(parts)

    def validate(self, n_train: int | None = None) -> None:
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; choose from {', '.join(OPTIMIZERS)}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if n_train is not None and self.batch_size > n_train:
            raise ConfigError(f"batch_size {self.batch_size} exceeds the {n_train} training rows")
        if self.optimizer in LIMITED_MEMORY and self.memory < 1:
            raise ConfigError("limited-memory optimizers need memory >= 1")
        if self.optimizer in MOMENTUM and not 0.0 <= self.resolved("mu") < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.resolved('mu')}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.resolved("alpha0") < 0 or self.svrg_alpha < 0:
            raise ConfigError("step sizes must be non-negative")


_CONVERTERS = {
    bool: _to_bool,
    int: int,
    float: float,
    str: str,
}


def _field_types():
    types = {}
    for f in fields(RunConfig):
        if f.name == "overrides":
            continue
        default = getattr(RunConfig, f.name, None)
        types[f.name] = _optional_float if f.name == "lr" else _CONVERTERS[type(default)]
    return types


def apply(cfg: RunConfig, pairs) -> RunConfig:
    """Apply ``(key, text)`` pairs; ``key.optimizer`` entries become overrides."""
    types = _field_types()
    updates = {}
    overrides = dict(cfg.overrides)
    for key, text in pairs:
        key = key.strip().replace("-", "_")
        text = str(text).strip()
        base, _, opt = key.partition(".")
        if opt:
            if base not in _PER_OPTIMIZER or opt not in OPTIMIZERS:
                raise ConfigError(f"unknown per-optimizer key {key!r}")
            overrides[key] = text
            continue
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            updates[key] = types[key](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {text!r}") from exc
    return replace(cfg, **updates, overrides=tuple(sorted(overrides.items())))


def parse_text(text: str, base: RunConfig | None = None) -> RunConfig:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = line.split("=", 1)
        pairs.append((k, v))
    return apply(base or RunConfig(), pairs)


def preset_dir() -> Path:
    return Path(os.environ.get(PRESET_ENV, _PACKAGE_PRESETS))


def list_presets() -> list[str]:
    return sorted(p.stem for p in preset_dir().glob("*.cfg"))


def load_config(ref: str) -> RunConfig:
    """Load a config file, or a preset by name when no such file exists."""
    path = Path(ref)
    if not path.is_file():
        path = preset_dir() / f"{ref}.cfg"
        if not path.is_file():
            raise ConfigError(f"no config file or preset named {ref!r} (presets: {', '.join(list_presets())})")
    return parse_text(path.read_text())
