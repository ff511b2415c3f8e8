"""Command-line interface: train, eval, sweep-snr, open-set."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_configs
from .evaluate import eval_with_producer_cli, evaluate_snr_sweep, predict_split
from .sampleio import write_predictions
from .train import load_checkpoint, train


def _emit(record: dict):
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")


def _log(msg: str):
    sys.stderr.write(msg + "\n")


def _cmd_train(args) -> int:
    net_cfg, train_cfg = load_configs(args.config)
    if args.seed is not None:
        import dataclasses

        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)
    if args.epochs is not None:
        import dataclasses

        train_cfg = dataclasses.replace(train_cfg, epochs=args.epochs)
    _, _, history = train(
        args.manifest, net_cfg, train_cfg, out_dir=args.out, resume=args.resume, log=_log
    )
    _emit(
        {
            "event": "training_done",
            "epochs_run": len(history["train_loss"]),
            "best_val_macro_f1": max(history["val_macro_f1"]),
            "final_val_acc": history["val_acc"][-1],
            "checkpoint": str(Path(args.out) / "best.pt"),
        }
    )
    return 0


def _cmd_eval(args) -> int:
    model, stats, _ = load_checkpoint(args.checkpoint)
    records = predict_split(model, stats, args.manifest, split=args.split)
    write_predictions(args.out, records)
    report = eval_with_producer_cli(args.out, args.manifest)
    _emit({"event": "eval_done", "predictions": str(args.out), **{k: report[k] for k in ("accuracy", "macro_f1")}})
    return 0


def _cmd_open_set(args) -> int:
    model, stats, payload = load_checkpoint(args.checkpoint)
    threshold = args.threshold if args.threshold is not None else payload["train"]["open_set_threshold"]
    records = predict_split(model, stats, args.manifest, split=args.split, threshold=threshold)
    write_predictions(args.out, records)
    report = eval_with_producer_cli(args.out, args.manifest)
    rec = {"event": "open_set_done", "threshold": threshold, "predictions": str(args.out)}
    if "open_set_auc" in report:
        rec["open_set_auc"] = report["open_set_auc"]
    _emit(rec)
    return 0


def _cmd_sweep(args) -> int:
    model, stats, _ = load_checkpoint(args.checkpoint)
    root = Path(args.sweep_root)
    manifests = {}
    for sub in sorted(root.glob("snr_*dB")):
        snr = float(sub.name[4:-2])
        manifests[snr] = sub / "manifest.json"
    if not manifests:
        _log(f"error: no snr_*dB subdirectories under {root}")
        return 2
    results = evaluate_snr_sweep(model, stats, manifests, args.out)
    for snr, rec in results.items():
        _emit({"event": "sweep_point", "snr_db": snr, **rec})
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asibip-net", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train")
    tr.add_argument("--manifest", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--config", default=None)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--resume", action="store_true")
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--split", default="test")
    ev.add_argument("--config", default=None)
    ev.add_argument("--seed", type=int, default=None)
    ev.set_defaults(func=_cmd_eval)

    os_ = sub.add_parser("open-set")
    os_.add_argument("--manifest", required=True)
    os_.add_argument("--checkpoint", required=True)
    os_.add_argument("--out", required=True)
    os_.add_argument("--split", default="test")
    os_.add_argument("--threshold", type=float, default=None)
    os_.add_argument("--config", default=None)
    os_.add_argument("--seed", type=int, default=None)
    os_.set_defaults(func=_cmd_open_set)

    sw = sub.add_parser("sweep-snr")
    sw.add_argument("--sweep-root", required=True)
    sw.add_argument("--checkpoint", required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--config", default=None)
    sw.add_argument("--seed", type=int, default=None)
    sw.set_defaults(func=_cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
