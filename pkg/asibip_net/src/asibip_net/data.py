"""In-memory dataset handling and per-feature standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .sampleio import Manifest, OPEN_SET_LABEL


@dataclass
class Standardizer:
    """Per-feature affine normalization fitted on the training split.

    Each branch keeps its own 6-entry mean/std over features aggregated
    across time and samples.
    """

    tv_mean: np.ndarray
    tv_std: np.ndarray
    uv_mean: np.ndarray
    uv_std: np.ndarray

    @classmethod
    def fit(cls, tv: np.ndarray, uv: np.ndarray) -> "Standardizer":
        # tv: (N, 6, S), uv: (N, 6, C)
        return cls(
            tv_mean=tv.mean(axis=(0, 2)),
            tv_std=np.maximum(tv.std(axis=(0, 2)), 1e-6),
            uv_mean=uv.mean(axis=(0, 2)),
            uv_std=np.maximum(uv.std(axis=(0, 2)), 1e-6),
        )

    def apply(self, tv: np.ndarray, uv: np.ndarray):
        tv = (tv - self.tv_mean[:, None]) / self.tv_std[:, None]
        uv = (uv - self.uv_mean[:, None]) / self.uv_std[:, None]
        return tv, uv

    def to_dict(self) -> dict:
        return {
            "tv_mean": self.tv_mean.tolist(),
            "tv_std": self.tv_std.tolist(),
            "uv_mean": self.uv_mean.tolist(),
            "uv_std": self.uv_std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(**{k: np.asarray(v) for k, v in d.items()})


@dataclass
class SplitArrays:
    ids: list
    tv: torch.Tensor  # (N, 6, S) float32, standardized
    uv: torch.Tensor  # (N, 6, C)
    labels: torch.Tensor  # (N,) int64 class indices 0..5 (known) or 6 (open-set)

    def __len__(self):
        return self.tv.shape[0]


def load_split(
    manifest: Manifest,
    split: str,
    stats: Standardizer | None = None,
    include_open_set: bool = False,
) -> tuple[SplitArrays, Standardizer]:
    """Load one split into tensors; fits the standardizer when none given."""
    records = manifest.split(split, include_open_set=include_open_set)
    if not records:
        raise ValueError(f"split {split!r} is empty")
    tv_list, uv_list, labels, ids = [], [], [], []
    for rec in records:
        label, tv, uv = manifest.load(rec)
        tv_list.append(tv)
        uv_list.append(uv)
        labels.append(label - 1 if label != OPEN_SET_LABEL else 6)
        ids.append(rec.sample_id)
    tv = np.stack(tv_list).astype(np.float64)
    uv = np.stack(uv_list).astype(np.float64)
    if stats is None:
        known = np.asarray(labels) != 6
        stats = Standardizer.fit(tv[known], uv[known])
    tv, uv = stats.apply(tv, uv)
    arrays = SplitArrays(
        ids=ids,
        tv=torch.from_numpy(tv.astype(np.float32)),
        uv=torch.from_numpy(uv.astype(np.float32)),
        labels=torch.tensor(labels, dtype=torch.int64),
    )
    return arrays, stats


def batches(arrays: SplitArrays, batch_size: int, shuffle: bool, seed: int = 0):
    n = len(arrays)
    if shuffle:
        gen = torch.Generator().manual_seed(seed)
        order = torch.randperm(n, generator=gen)
    else:
        order = torch.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        yield arrays.tv[idx], arrays.uv[idx], arrays.labels[idx], idx
