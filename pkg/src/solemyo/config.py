"""Experiment configuration file: one JSON document, one experiment.

Sections: "data" (windowing strides), "augment", "model", "train",
"split" (a '<mode>:<held-out>' string), and "synth" (dataset generation).
Every section is optional and falls back to package defaults; unknown
sections or keys are errors, not silent typos.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .augment import AugmentConfig
from .errors import ConfigError, DataFormatError
from .model import ModelConfig
from .train import TrainConfig

_SECTIONS = ("data", "augment", "model", "train", "split", "synth")

_DATA_KEYS = {"stride_train", "stride_eval"}
_SYNTH_KEYS = {"n_users", "duration_s", "seed", "noise_sigma_kg",
               "random_asymmetry", "motions"}


@dataclass
class DataConfig:
    stride_train: int = 10
    stride_eval: int = 1

    def validate(self):
        if self.stride_train < 1 or self.stride_eval < 1:
            raise ConfigError("strides must be >= 1")


@dataclass
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    split: str = ""
    synth: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "data": dict(self.data.__dict__),
            "augment": self.augment.to_dict(),
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "split": self.split,
            "synth": self.synth,
        }


def _check_keys(section: str, doc: dict, allowed: set):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in config section {section!r}: {sorted(unknown)}")


def load_experiment_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataFormatError(f"config {path!r} must hold a JSON object")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    cfg = ExperimentConfig()
    if "data" in doc:
        _check_keys("data", doc["data"], _DATA_KEYS)
        cfg.data = DataConfig(**doc["data"])
        cfg.data.validate()
    if "augment" in doc:
        cfg.augment = AugmentConfig.from_dict(doc["augment"])
    if "model" in doc:
        cfg.model = ModelConfig.from_dict(doc["model"])
    if "train" in doc:
        cfg.train = TrainConfig.from_dict(doc["train"])
    if "split" in doc:
        cfg.split = str(doc["split"])
    if "synth" in doc:
        _check_keys("synth", doc["synth"], _SYNTH_KEYS)
        cfg.synth = dict(doc["synth"])
    return cfg


def save_experiment_config(path, cfg: ExperimentConfig):
    with open(path, "w") as f:
        json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
