import hashlib
import json
import os
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

CACHE = Path(__file__).parent.parent / ".cache"

# Class-dependent synthetic signatures for producer-independent tests:
# distinct frequency + feature emphasis per label.
_SIGNATURE_FREQ = {1: 1.0, 2: 2.0, 3: 3.0, 4: 4.0, 5: 5.0, 6: 6.0, 7: 0.0}


def synth_sample_bytes(label: int, s: int, c: int, seed: int) -> bytes:
    rng = np.random.default_rng(seed)
    t_hi = np.linspace(0, 1, s)
    t_lo = np.linspace(0, 1, c)
    freq = _SIGNATURE_FREQ[label]
    p_tv = 0.3 * rng.standard_normal((6, s)) + np.sin(2 * np.pi * freq * t_hi)[None, :] * (
        1 + np.arange(6)[:, None] / 6
    )
    p_uv = 0.3 * rng.standard_normal((6, c)) + np.cos(2 * np.pi * freq * t_lo)[None, :]
    head = struct.pack("<4sHBII", b"ISBP", 1, label, s, c)
    return head + p_tv.astype("<f4").tobytes() + p_uv.astype("<f4").tobytes()


def make_synthetic_dataset(out_dir: Path, n_train=24, n_val=12, n_test=12, s=40, c=20):
    """Hand-written dataset in the documented on-disk format."""
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = []
    counter = 0
    for split, count, with_open in (("train", n_train, False), ("val", n_val, True), ("test", n_test, True)):
        labels = [1 + i % 6 for i in range(count)]
        if with_open:
            labels += [7, 7]
        for label in labels:
            sid = f"{split[0]}{counter:04d}"
            counter += 1
            (out_dir / f"{sid}.isbp").write_bytes(synth_sample_bytes(label, s, c, counter))
            samples.append(
                {"sample_id": sid, "label": label, "split": split, "path": f"{sid}.isbp",
                 "seed": counter, "snr_db": None, "case_id": 1}
            )
    manifest = {
        "format_version": 1,
        "fingerprint": "synthetic-" + hashlib.sha256(str(counter).encode()).hexdigest()[:16],
        "case_id": 1,
        "split_counts": {},
        "class_histogram": {},
        "samples": samples,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest))
    return out_dir / "manifest.json"


@pytest.fixture(scope="session")
def synthetic_manifest(tmp_path_factory):
    return make_synthetic_dataset(tmp_path_factory.mktemp("synth"))


def producer_defaults_fingerprint() -> str:
    """Identity of the producer's default desk-scale configuration.

    Folded into dataset cache keys so cached builds invalidate whenever the
    installed producer's defaults change.
    """
    from isacbip.config import PipelineConfig, config_fingerprint, desk_scale

    return config_fingerprint(desk_scale(PipelineConfig()))


def producer_dataset(name: str, gen_args: list) -> Path:
    """Build (or reuse) a dataset through the producer CLI.

    Cached under .cache/ keyed by the arguments and the producer's config
    identity; producer builds are deterministic for fixed arguments, so a
    cache hit is byte-equivalent to a rebuild.
    """
    payload = " ".join(gen_args) + producer_defaults_fingerprint()
    key = hashlib.sha256(payload.encode()).hexdigest()[:10]
    out = CACHE / f"{name}-{key}"
    manifest = out / "manifest.json"
    if not manifest.exists():
        cmd = ["isacbip"] + gen_args + ["--out", str(out)]
        print(f"\n[build] {' '.join(cmd)}", file=sys.stderr)
        subprocess.run(cmd, check=True, stdout=subprocess.DEVNULL)
    return manifest


def cached_training(manifest: Path, seed: int, tag: str, epochs: int | None = None):
    """Train (or load the cached checkpoint for) one configuration."""
    import dataclasses

    from asibip_net.config import TrainConfig
    from asibip_net.train import load_checkpoint, train

    cfg = TrainConfig(seed=seed)
    if epochs is not None:
        cfg = dataclasses.replace(cfg, epochs=epochs)
    fingerprint = json.loads(manifest.read_text())["fingerprint"]
    key = hashlib.sha256(f"{fingerprint}|{seed}|{cfg}".encode()).hexdigest()[:12]
    out = CACHE / "models" / f"{tag}-{key}"
    best = out / "best.pt"
    if best.exists() and os.environ.get("ASIBIP_NET_NO_CACHE", "") in ("", "0"):
        model, stats, payload = load_checkpoint(best)
        return model, stats, payload["history"]
    model, stats, history = train(manifest, train_cfg=cfg, out_dir=out, log=lambda m: print(m, file=sys.stderr))
    return model, stats, history
