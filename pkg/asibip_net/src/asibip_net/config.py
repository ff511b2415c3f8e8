"""Network and training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml


@dataclass(frozen=True)
class NetworkConfig:
    """Dual-branch encoder sizes.

    Each branch runs a bidirectional LSTM over its own native-rate sequence
    (no resampling or alignment of either input); branch outputs are pooled
    to ``tokens_per_branch`` tokens before the shared attention encoder.
    """

    lstm_hidden: int = 64
    lstm_layers: int = 1
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    tokens_per_branch: int = 20
    dropout: float = 0.1
    n_classes: int = 6

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")


@dataclass(frozen=True)
class FocalLossParams:
    gamma: float = 2.0
    alpha: tuple | None = None  # per-class weights; None = uniform 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.alpha is not None and any(a <= 0 for a in self.alpha):
            raise ValueError("alpha weights must be positive")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-4
    betas: tuple = (0.9, 0.999)
    epochs: int = 100
    patience: int = 15  # early stop on validation macro F1
    seed: int = 0
    open_set_threshold: float = 0.99
    gamma: float = 2.0

    def __post_init__(self):
        if self.batch_size <= 0 or self.learning_rate <= 0 or self.epochs <= 0:
            raise ValueError("hyperparameters must be positive")
        if not 0.0 < self.open_set_threshold < 1.0:
            raise ValueError("open-set threshold must lie in (0, 1)")


def load_configs(path=None) -> tuple[NetworkConfig, TrainConfig]:
    if path is None:
        return NetworkConfig(), TrainConfig()
    data = yaml.safe_load(open(path, "r", encoding="utf-8")) or {}
    net = NetworkConfig(**data.get("network", {}))
    tr = data.get("train", {})
    if "betas" in tr:
        tr["betas"] = tuple(tr["betas"])
    return net, TrainConfig(**tr)
