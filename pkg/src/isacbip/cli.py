"""Command-line interface.

Subcommands: ``gen``, ``inspect``, ``eval-metrics``, ``sweep-snr``. Every
command prints machine-readable records to stdout (one JSON object per
line) and human-readable summaries to stderr. The config file path comes
from ``--config`` or the ``ISACBIP_CONFIG`` environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig, desk_scale, load_config
from .errors import IsacBipError
from .kinematics import BehaviorClass
from .metrics import confusion, load_predictions, prf1, report_table, report_to_dict, roc_auc
from .pipeline import CaseSpec, build_dataset, build_snr_sweep
from .sampleio import read_manifest


def _emit(record: dict) -> None:
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")


def _log(msg: str) -> None:
    sys.stderr.write(msg + "\n")


def _load_cfg(args) -> PipelineConfig:
    path = args.config or os.environ.get("ISACBIP_CONFIG") or None
    cfg = load_config(path)
    if getattr(args, "scale", False):
        cfg = desk_scale(cfg)
    if getattr(args, "workers", None):
        cfg = dataclasses.replace(cfg, n_workers=args.workers)
    return cfg


def _cmd_gen(args) -> int:
    cfg = _load_cfg(args)
    case = CaseSpec.for_case(args.case)
    if args.impairment is not None and args.impairment != case.impairment:
        case = CaseSpec(0, case.tv_source, args.impairment)
    manifest = build_dataset(
        cfg, case, args.n, args.seed, args.out,
        n_test=args.n_test, eval_only=args.eval_only,
    )
    _emit(
        {
            "event": "dataset_built",
            "out": str(args.out),
            "case_id": case.case_id,
            "tv_source": case.tv_source,
            "impairment": case.impairment,
            "fingerprint": manifest.fingerprint,
            "split_counts": manifest.split_counts,
            "class_histogram": {str(k): v for k, v in sorted(manifest.class_histogram.items())},
        }
    )
    _log(f"wrote {len(manifest.entries)} samples to {args.out} (fingerprint {manifest.fingerprint[:12]})")
    return 0


def _cmd_inspect(args) -> int:
    manifest = read_manifest(args.manifest)
    record = {
        "event": "manifest",
        "fingerprint": manifest.fingerprint,
        "case_id": manifest.case_id,
        "split_counts": manifest.split_counts,
        "class_histogram": {str(k): v for k, v in sorted(manifest.class_histogram.items())},
        "n_samples": len(manifest.entries),
    }
    _emit(record)
    _log(f"case {manifest.case_id}: {len(manifest.entries)} samples, splits {manifest.split_counts}")
    return 0


def _cmd_eval_metrics(args) -> int:
    manifest = read_manifest(args.manifest)
    labels_by_id = {e.sample_id: e.label for e in manifest.entries}
    records = load_predictions(args.pred)
    known = [b.label for b in BehaviorClass.known()]
    truths, preds = [], []
    scores, is_known = [], []
    for rec in records:
        sid = rec["sample_id"]
        if sid not in labels_by_id:
            raise IsacBipError(f"prediction for unknown sample id {sid!r}")
        truth = labels_by_id[sid]
        conf = rec.get("confidence")
        if conf:
            scores.append(max(conf))
            is_known.append(truth in known)
        if truth in known:
            truths.append(truth)
            preds.append(rec["pred"])
    cm = confusion(preds, truths, labels=known)
    report = prf1(cm)
    auc = None
    if scores and any(is_known) and not all(is_known):
        _, auc = roc_auc(scores, is_known)
        report = dataclasses.replace(report, auc=auc)
    payload = report_to_dict(report)
    payload["event"] = "metric_report"
    payload["n_predictions"] = len(records)
    _emit(payload)
    _log(report_table(report))
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _cmd_sweep_snr(args) -> int:
    cfg = _load_cfg(args)
    snrs = [float(s) for s in args.snr_list.split(",")]
    manifests = build_snr_sweep(
        cfg, snrs, args.n, args.seed, args.out, impairment=args.impairment or "none"
    )
    for snr, path in manifests.items():
        _emit({"event": "sweep_set_built", "snr_db": snr, "manifest": path})
    _log(f"built {len(manifests)} evaluation sets under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isacbip", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a labeled dataset for one case")
    gen.add_argument("--case", type=int, required=True, choices=range(1, 6))
    gen.add_argument("--n", type=int, required=True, help="known-class sample count")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--n-test", type=int, default=None)
    gen.add_argument("--scale", action="store_true", help="desk-scale profile (100 Hz)")
    gen.add_argument("--eval-only", action="store_true", help="all samples in the test split")
    gen.add_argument("--impairment", choices=IMPAIRMENT_CHOICES, default=None)
    gen.add_argument("--workers", type=int, default=None)
    gen.add_argument("--config", default=None)
    gen.set_defaults(func=_cmd_gen)

    ins = sub.add_parser("inspect", help="summarize a dataset manifest")
    ins.add_argument("manifest")
    ins.set_defaults(func=_cmd_inspect)

    ev = sub.add_parser("eval-metrics", help="score a prediction file against a manifest")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=_cmd_eval_metrics)

    sw = sub.add_parser("sweep-snr", help="build fixed-SNR echo-pipeline eval sets")
    sw.add_argument("--snr-list", required=True, help="comma-separated dB values")
    sw.add_argument("--n", type=int, required=True)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--out", required=True)
    sw.add_argument("--impairment", choices=IMPAIRMENT_CHOICES, default=None)
    sw.add_argument("--scale", action="store_true")
    sw.add_argument("--workers", type=int, default=None)
    sw.add_argument("--config", default=None)
    sw.set_defaults(func=_cmd_sweep_snr)
    return ap


IMPAIRMENT_CHOICES = ("none", "weather", "nlos")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IsacBipError as exc:
        _log(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
