"""Reader for the dataset producer's on-disk formats.

This package talks to the data-generation toolkit only through its
published file formats, re-implemented here from the format spec:

* ``.isbp`` samples: little-endian ``"ISBP"`` magic, u16 version (1),
  u8 label, u32 S, u32 C, then row-major float32 6xS and 6xC matrices.
* ``manifest.json``: per-sample records (id, label, split, path, seed,
  snr_db) plus a config fingerprint.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"ISBP"
VERSION = 1
HEADER = struct.Struct("<4sHBII")

KNOWN_LABELS = (1, 2, 3, 4, 5, 6)
OPEN_SET_LABEL = 7  # "following"; never trained on
LABEL_NAMES = {
    1: "hard_brake",
    2: "left_lane_change",
    3: "right_lane_change",
    4: "overtake",
    5: "hard_accel",
    6: "evasive_swerve",
    7: "following",
}


class SampleFormatError(ValueError):
    pass


def read_sample(path) -> tuple[int, np.ndarray, np.ndarray]:
    """Return (label, high-rate 6xS matrix, low-rate 6xC matrix)."""
    blob = Path(path).read_bytes()
    if len(blob) < HEADER.size:
        raise SampleFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, label, s, c = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise SampleFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SampleFormatError(f"{path}: unsupported version {version}")
    expected = HEADER.size + 4 * 6 * (s + c)
    if len(blob) != expected:
        raise SampleFormatError(f"{path}: expected {expected} bytes, got {len(blob)}")
    p_tv = np.frombuffer(blob, dtype="<f4", count=6 * s, offset=HEADER.size).reshape(6, s)
    p_uv = np.frombuffer(blob, dtype="<f4", count=6 * c, offset=HEADER.size + 24 * s).reshape(6, c)
    return int(label), p_tv.copy(), p_uv.copy()


@dataclass(frozen=True)
class ManifestRecord:
    sample_id: str
    label: int
    split: str
    path: str
    snr_db: float | None


@dataclass(frozen=True)
class Manifest:
    root: Path
    fingerprint: str
    records: tuple

    def split(self, name: str, include_open_set: bool = True):
        out = [r for r in self.records if r.split == name]
        if not include_open_set:
            out = [r for r in out if r.label != OPEN_SET_LABEL]
        return out

    def load(self, record: ManifestRecord):
        return read_sample(self.root / record.path)


def read_manifest(path) -> Manifest:
    path = Path(path)
    payload = json.loads(path.read_text(encoding="utf-8"))
    records = tuple(
        ManifestRecord(
            sample_id=rec["sample_id"],
            label=int(rec["label"]),
            split=rec["split"],
            path=rec["path"],
            snr_db=rec.get("snr_db"),
        )
        for rec in payload["samples"]
    )
    return Manifest(root=path.parent, fingerprint=payload["fingerprint"], records=records)


def write_predictions(path, records) -> None:
    """Write line-JSON predictions: {"sample_id", "pred", "confidence"}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
