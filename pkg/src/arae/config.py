"""Experiment configuration, named presets and dataset/protocol construction."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data
from .errors import ConfigurationError
from .training import TrainConfig


@dataclass
class DatasetSpec:
    name: str = "bars"  # bars | mnist | fashion_mnist
    data_dir: str | None = None
    downscale: int = 1
    count_per_class: int = 100
    side: int = 8


@dataclass
class ProtocolSpec:
    kind: str = "p2"
    normal_classes: tuple = (0,)
    tau: float = 0.5

    def __post_init__(self):
        if self.kind not in ("p1", "p2"):
            raise ConfigurationError(f"unknown protocol {self.kind!r}")
        self.normal_classes = tuple(int(c) for c in self.normal_classes)


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    attack_epsilons: tuple = (0.05, 0.1)
    attack_steps: int = 10
    validate: bool = True
    f1_positive: str = "anomalous"
    out_dir: str = "runs/experiment"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.dataset, dict):
            self.dataset = DatasetSpec(**self.dataset)
        if isinstance(self.protocol, dict):
            self.protocol = ProtocolSpec(**self.protocol)
        if isinstance(self.train, dict):
            self.train = TrainConfig.from_dict(self.train)
        self.attack_epsilons = tuple(float(e) for e in self.attack_epsilons)
        # one seed drives everything
        self.train.seed = self.seed

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train"] = self.train.to_dict()
        d["protocol"]["normal_classes"] = list(self.protocol.normal_classes)
        d["attack_epsilons"] = list(self.attack_epsilons)
        return d

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (TypeError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"{path}: {e}") from e

    def rng(self, purpose: str) -> np.random.Generator:
        """Independent stream per purpose, all derived from ``seed``."""
        key = {"data": 1, "protocol": 2, "interpret": 3}[purpose]
        return np.random.default_rng([self.seed, key])


PRESETS = {
    "bars": ExperimentConfig(
        dataset=DatasetSpec("bars", count_per_class=100, side=8),
        protocol=ProtocolSpec("p2", (0,)),
        train=TrainConfig(epsilon=0.1, gamma=0.1, epochs=30, batch_size=8,
                          learning_rate=2e-2, hidden=(32, 8)),
        attack_epsilons=(0.05, 0.1),
        out_dir="runs/bars",
    ),
    "mnist8-mini": ExperimentConfig(
        dataset=DatasetSpec("mnist", data_dir="data/mnist", downscale=2),
        protocol=ProtocolSpec("p2", (8,)),
        train=TrainConfig(epsilon=0.05, gamma=0.1, epochs=20, batch_size=32,
                          learning_rate=3e-3, hidden=(256, 128, 64)),
        out_dir="runs/mnist8-mini",
    ),
    "mnist8-full": ExperimentConfig(
        dataset=DatasetSpec("mnist", data_dir="data/mnist", downscale=1),
        protocol=ProtocolSpec("p2", (8,)),
        train=TrainConfig(epsilon=0.2, gamma=0.1, epochs=100, batch_size=128,
                          learning_rate=1e-3, hidden=(512, 256, 128)),
        out_dir="runs/mnist8-full",
    ),
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


def load_dataset(cfg: ExperimentConfig) -> data.LabeledDataset:
    spec = cfg.dataset
    if spec.name == "bars":
        ds = data.make_synthetic_bars(spec.count_per_class, spec.side, cfg.rng("data"))
    elif spec.name in ("mnist", "fashion_mnist"):
        if not spec.data_dir:
            raise ConfigurationError(f"dataset {spec.name!r} needs data_dir")
        ds = data.load_mnist(spec.data_dir, spec.name)
    else:
        raise ConfigurationError(f"unknown dataset {spec.name!r}")
    if spec.downscale > 1:
        ds = data.downscale_dataset(ds, spec.downscale)
    return ds


def build_split(cfg: ExperimentConfig, ds=None) -> data.ProtocolSplit:
    ds = load_dataset(cfg) if ds is None else ds
    p = cfg.protocol
    if p.kind == "p2":
        return data.make_protocol2(ds, p.normal_classes)
    return data.make_protocol1(ds, p.normal_classes, p.tau, cfg.rng("protocol"))
