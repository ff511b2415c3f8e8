"""Prediction writing and evaluation through the dataset toolkit's CLI.

All reported metrics come from the producer side: this module writes
line-JSON prediction files and invokes ``isacbip eval-metrics`` on them,
parsing its machine-readable stdout record.
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path

import torch

from .data import batches, load_split
from .model import AsiBipNet, predict_open_set
from .sampleio import read_manifest, write_predictions


def predict_split(
    model: AsiBipNet,
    stats,
    manifest_path,
    split: str = "test",
    include_open_set: bool = True,
    threshold: float | None = None,
    batch_size: int = 64,
) -> list:
    """Per-sample prediction records for one split.

    With ``threshold`` set, samples whose max confidence falls below it are
    rejected as unknown (label 7).
    """
    manifest = read_manifest(manifest_path)
    arrays, _ = load_split(manifest, split, stats=stats, include_open_set=include_open_set)
    records = []
    model.eval()
    with torch.no_grad():
        for tv, uv, _, idx in batches(arrays, batch_size, shuffle=False):
            conf = torch.softmax(model(tv, uv), dim=-1)
            if threshold is None:
                preds = conf.argmax(dim=-1) + 1
            else:
                preds = predict_open_set(conf, threshold)
            for row, p, i in zip(conf, preds, idx):
                records.append(
                    {
                        "sample_id": arrays.ids[int(i)],
                        "pred": int(p),
                        "confidence": [float(v) for v in row],
                    }
                )
    return records


def eval_with_producer_cli(pred_path, manifest_path) -> dict:
    """Run ``isacbip eval-metrics`` and return its metric_report record."""
    proc = subprocess.run(
        ["isacbip", "eval-metrics", "--pred", str(pred_path), "--manifest", str(manifest_path)],
        capture_output=True,
        text=True,
        check=True,
    )
    for line in proc.stdout.splitlines():
        rec = json.loads(line)
        if rec.get("event") == "metric_report":
            return rec
    raise RuntimeError("eval-metrics emitted no metric_report record")


def evaluate_manifest(model, stats, manifest_path, out_path, split="test", threshold=None) -> dict:
    records = predict_split(model, stats, manifest_path, split=split, threshold=threshold)
    write_predictions(out_path, records)
    return eval_with_producer_cli(out_path, manifest_path)


def evaluate_cases(checkpoints: dict, case_manifests: dict, out_dir) -> dict:
    """Per-case accuracy and macro F1 on each case's test split.

    ``checkpoints`` maps case id -> (model, stats); ``case_manifests`` maps
    case id -> manifest path. Returns {case_id: {"accuracy", "macro_f1"}}.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = {}
    for case_id, manifest_path in case_manifests.items():
        model, stats = checkpoints[case_id]
        report = evaluate_manifest(
            model, stats, manifest_path, out_dir / f"case{case_id}_preds.jsonl"
        )
        table[case_id] = {"accuracy": report["accuracy"], "macro_f1": report["macro_f1"]}
    return table


def evaluate_snr_sweep(model, stats, sweep_manifests: dict, out_dir) -> dict:
    """Per-SNR per-class F1 via the producer CLI.

    ``sweep_manifests`` maps SNR (dB) -> manifest path; returns
    {snr: {"per_class_f1": {label: f1}, "macro_f1", "accuracy"}}.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    for snr, manifest_path in sorted(sweep_manifests.items()):
        report = evaluate_manifest(
            model, stats, manifest_path, out_dir / f"snr_{snr:+.0f}_preds.jsonl"
        )
        results[snr] = {
            "per_class_f1": {int(k): v["f1"] for k, v in report["per_class"].items()},
            "macro_f1": report["macro_f1"],
            "accuracy": report["accuracy"],
        }
    return results
