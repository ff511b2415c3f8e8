"""On-disk sample format and dataset manifest.

Sample file layout (little-endian):

    offset  size  field
    0       4     magic "ISBP"
    4       2     format version (u16), currently 1
    6       1     behavior label g (u8)
    7       4     S, high-rate column count (u32)
    11      4     C, low-rate column count (u32)
    15      24*S  high-rate matrix, row-major float32 (6 x S)
    15+24S  24*C  low-rate matrix, row-major float32 (6 x C)

The manifest is deterministic JSON (sorted keys, no timestamps) whose
fingerprint covers the fully resolved configuration and build seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"ISBP"
VERSION = 1
HEADER = struct.Struct("<4sHBII")  # magic, version, label, S, C
MANIFEST_VERSION = 1


@dataclass
class Sample:
    """One labeled training/evaluation sample.

    Matrices are float32, which is also the wire precision; write/read
    round-trips are bit-exact.
    """

    p_tv: np.ndarray  # (6, S)
    p_uv: np.ndarray  # (6, C)
    label: int
    sample_id: str = ""
    seed: int = 0
    case_id: int = 0

    def __post_init__(self):
        self.p_tv = np.ascontiguousarray(self.p_tv, dtype=np.float32)
        self.p_uv = np.ascontiguousarray(self.p_uv, dtype=np.float32)
        if self.p_tv.shape[0] != 6 or self.p_uv.shape[0] != 6:
            raise FormatError("physical information matrices must have 6 rows")
        if not 1 <= self.label <= 255:
            raise FormatError(f"label {self.label} outside u8 range")


def write_sample(sample: Sample, path) -> None:
    s = sample.p_tv.shape[1]
    c = sample.p_uv.shape[1]
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, sample.label, s, c))
        fh.write(sample.p_tv.tobytes())
        fh.write(sample.p_uv.tobytes())


def read_sample(path) -> Sample:
    """Read one sample; raises FormatError with the failing byte offset."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER.size:
        raise FormatError(f"truncated header: expected {HEADER.size} bytes, got {len(blob)} at offset 0")
    magic, version, label, s, c = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    expected = HEADER.size + 4 * 6 * (s + c)
    if len(blob) != expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes, got {len(blob)} at offset {min(len(blob), expected)}"
        )
    off = HEADER.size
    p_tv = np.frombuffer(blob, dtype="<f4", count=6 * s, offset=off).reshape(6, s)
    off += 4 * 6 * s
    p_uv = np.frombuffer(blob, dtype="<f4", count=6 * c, offset=off).reshape(6, c)
    return Sample(p_tv=p_tv.copy(), p_uv=p_uv.copy(), label=label, sample_id=Path(path).stem)


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    label: int
    split: str  # train | val | test
    path: str  # relative to the manifest directory
    seed: int
    snr_db: float | None
    case_id: int


@dataclass
class DatasetManifest:
    fingerprint: str
    case_id: int
    entries: list = field(default_factory=list)
    format_version: int = MANIFEST_VERSION

    @property
    def split_counts(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out[e.split] = out.get(e.split, 0) + 1
        return out

    @property
    def class_histogram(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out[e.label] = out.get(e.label, 0) + 1
        return out

    def split(self, name: str) -> list:
        return [e for e in self.entries if e.split == name]


def write_manifest(manifest: DatasetManifest, path) -> None:
    payload = {
        "format_version": manifest.format_version,
        "fingerprint": manifest.fingerprint,
        "case_id": manifest.case_id,
        "split_counts": manifest.split_counts,
        "class_histogram": {str(k): v for k, v in sorted(manifest.class_histogram.items())},
        "samples": [asdict(e) for e in sorted(manifest.entries, key=lambda e: e.sample_id)],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_manifest(path) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest is not valid JSON: {exc}") from exc
    if payload.get("format_version") != MANIFEST_VERSION:
        raise FormatError(f"unsupported manifest version {payload.get('format_version')}")
    entries = [ManifestEntry(**rec) for rec in payload["samples"]]
    return DatasetManifest(
        fingerprint=payload["fingerprint"], case_id=payload["case_id"], entries=entries
    )
