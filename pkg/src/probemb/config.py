"""Run configuration: dataclasses with strict JSON loading.

Unknown keys anywhere in the document are a hard error so that typos
cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigurationError
from .losses import LossConfig


@dataclass
class DatasetConfig:
    classes: int = 64
    per_class: int = 30
    input_dim: int = 32
    kappa: float = 40.0
    seed: Optional[int] = None  # None: derive from the run's master seed

    def __post_init__(self):
        if self.classes % 8 != 0:
            raise ConfigurationError("dataset.classes must be divisible by 8")
        if self.per_class < 2:
            raise ConfigurationError("dataset.per_class must be >= 2")
        if self.kappa <= 0:
            raise ConfigurationError("dataset.kappa must be > 0")


@dataclass
class EncoderSection:
    hidden_dims: list = field(default_factory=lambda: [64, 64])
    embed_dim: int = 16

    def __post_init__(self):
        if not self.hidden_dims:
            raise ConfigurationError("encoder.hidden_dims must be nonempty")
        if self.embed_dim < 2:
            raise ConfigurationError("encoder.embed_dim must be >= 2")


@dataclass
class OptimizerConfig:
    lr_backbone: float = 0.05
    lr_classifier: float = 0.5
    momentum: float = 0.9
    weight_decay: float = 1e-4

    def __post_init__(self):
        if self.lr_backbone <= 0 or self.lr_classifier <= 0:
            raise ConfigurationError("learning rates must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigurationError("weight_decay must be >= 0")


@dataclass
class TrainSection:
    epochs: int = 200
    patience: int = 10
    batch_size: int = 64

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigurationError("train.patience must be >= 1")
        if self.epochs < 0:
            raise ConfigurationError("train.epochs must be >= 0")
        if self.batch_size < 2:
            raise ConfigurationError("train.batch_size must be >= 2")


@dataclass
class SearchConfig:
    trials: int = 10
    lr_backbone_range: list = field(default_factory=lambda: [1e-3, 1e-1])
    lr_classifier_range: list = field(default_factory=lambda: [1e-2, 1.0])

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError("search.trials must be >= 1")
        for name, rng in (("lr_backbone_range", self.lr_backbone_range),
                          ("lr_classifier_range", self.lr_classifier_range)):
            if len(rng) != 2 or rng[0] <= 0 or rng[1] < rng[0]:
                raise ConfigurationError(f"search.{name} must be [lo, hi] with 0 < lo <= hi")


@dataclass
class StageOverrides:
    """Optional second-stage hyperparameters for the two-stage method."""
    epochs: Optional[int] = None
    patience: Optional[int] = None
    lr_backbone: Optional[float] = None
    lr_classifier: Optional[float] = None
    kl_weight: Optional[float] = None


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    encoder: EncoderSection = field(default_factory=EncoderSection)
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    train: TrainSection = field(default_factory=TrainSection)
    scoring: Optional[str] = None       # None: method default
    distribution: Optional[str] = None  # None: method default
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    search: Optional[SearchConfig] = None
    stage2: Optional[StageOverrides] = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("seeds must contain at least one seed")
        if self.distribution not in (None, "normal", "vmf"):
            raise ConfigurationError(f"unknown distribution {self.distribution!r}")


_SECTIONS = {
    "dataset": DatasetConfig,
    "encoder": EncoderSection,
    "loss": LossConfig,
    "optimizer": OptimizerConfig,
    "train": TrainSection,
    "search": SearchConfig,
    "stage2": StageOverrides,
}


def _build(cls, value, path: str):
    if not isinstance(value, dict):
        raise ConfigurationError(f"{path}: expected an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(value) - known
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    try:
        return cls(**value)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be an object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"config: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        if key in _SECTIONS and value is not None:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(doc)


def config_to_dict(config: RunConfig) -> dict:
    return dataclasses.asdict(config)
