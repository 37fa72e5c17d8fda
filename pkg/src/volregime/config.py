"""Experiment configuration: an INI file with sections, overridable key by key."""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .forecast import ALL_METHODS

# config key -> (section, type)
_SCHEMA = {
    "dataset_path": ("data", str),
    "dataset_format": ("data", str),
    "dataset_name": ("data", str),
    "w": ("window", int),
    "train_fraction": ("window", float),
    "q": ("window", float),
    "n": ("pool", int),
    "J": ("pool", int),
    "m": ("pool", int),
    "K": ("sampler", int),
    "alpha": ("sampler", float),
    "alpha_low": ("sampler", float),
    "alpha_high": ("sampler", float),
    "tau_prime": ("sampler", float),
    "backend": ("model", str),
    "endpoint": ("model", str),
    "model": ("model", str),
    "max_in_flight": ("model", int),
    "timeout": ("model", float),
    "max_retries": ("model", int),
    "max_reply_tokens": ("model", int),
    "cassette": ("model", str),
    "pool_seed": ("seeds", int),
    "sampler_seed": ("seeds", int),
    "garch_seed": ("seeds", int),
    "methods": ("evaluate", tuple),
    "output_dir": ("output", str),
}


@dataclass
class ExperimentConfig:
    dataset_path: str = ""
    dataset_format: str = "auto"
    dataset_name: str = ""
    w: int = 7
    train_fraction: float = 0.7
    q: float = 0.8
    n: int = 500
    J: int = 3
    m: int = 3
    K: int = 5
    alpha: float | None = None
    alpha_low: float = 0.8
    alpha_high: float = 0.2
    tau_prime: float | None = None
    backend: str = "mock:echo_last_variance"
    endpoint: str = ""
    model: str = "gpt-4o-mini"
    max_in_flight: int = 4
    timeout: float = 60.0
    max_retries: int = 3
    max_reply_tokens: int = 256
    cassette: str = ""
    pool_seed: int = 0
    sampler_seed: int = 0
    garch_seed: int = 0
    methods: tuple = field(default=ALL_METHODS)
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.w < 1:
            raise ConfigurationError("w must be positive")
        if not self.m < self.w:
            raise ConfigurationError(f"m ({self.m}) must be smaller than w ({self.w})")
        if not 0 < self.train_fraction < 1:
            raise ConfigurationError("train_fraction must lie in (0, 1)")
        if not 0 <= self.q <= 1:
            raise ConfigurationError("q must lie in [0, 1]")
        if self.n < 1 or self.J < 0 or self.K < 0:
            raise ConfigurationError("n must be positive; J and K nonnegative")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ConfigurationError(f"unknown methods {sorted(unknown)}; choose from {ALL_METHODS}")
        if "label_estimate" in self.methods and not self.alpha_low > self.alpha_high:
            raise ConfigurationError("alpha_low must exceed alpha_high")

    @property
    def dataset_id(self) -> str:
        return self.dataset_name or Path(self.dataset_path).stem

    @property
    def needs_model(self) -> bool:
        return any(m not in ("rolling_mean", "har", "garch", "gjr_garch") for m in self.methods)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


def _convert(key: str, raw: str):
    _, kind = _SCHEMA[key]
    raw = raw.strip()
    if kind is tuple:
        return tuple(x.strip() for x in raw.replace("\n", ",").split(",") if x.strip())
    if raw.lower() in ("", "none") and key in ("alpha", "tau_prime"):
        return None
    try:
        return kind(raw)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def apply_overrides(config: ExperimentConfig, pairs) -> ExperimentConfig:
    """``key=value`` strings (``section.key`` also accepted) applied on top of ``config``."""
    changes = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(f"override must look like key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip().split(".")[-1]
        if key not in _SCHEMA:
            raise ConfigurationError(f"unknown config key {key!r}")
        changes[key] = _convert(key, raw)
    return config.replace(**changes)


def load_config(path=None, overrides=()) -> ExperimentConfig:
    config = ExperimentConfig()
    pairs = []
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file {path} not found")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # keys such as J and K are case-sensitive
        parser.read(path)
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key not in _SCHEMA:
                    raise ConfigurationError(f"[{section}] {key}: unknown config key")
                if _SCHEMA[key][0] != section:
                    raise ConfigurationError(f"{key} belongs in [{_SCHEMA[key][0]}], found in [{section}]")
                pairs.append(f"{key}={raw}")
        # relative dataset paths resolve against the config file
        config = apply_overrides(config, pairs)
        if config.dataset_path and not Path(config.dataset_path).is_absolute():
            config = config.replace(dataset_path=str(path.parent / config.dataset_path))
    return apply_overrides(config, overrides)


def dump_config(config: ExperimentConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for key, (section, kind) in _SCHEMA.items():
        value = getattr(config, key)
        if not parser.has_section(section):
            parser.add_section(section)
        if kind is tuple:
            value = ", ".join(value)
        parser.set(section, key, "" if value is None else str(value))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
