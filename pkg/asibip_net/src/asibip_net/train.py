"""Seeded, resumable training with focal loss and early stopping."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .config import FocalLossParams, NetworkConfig, TrainConfig
from .data import Standardizer, batches, load_split
from .loss import focal_loss, inverse_frequency_alpha
from .model import AsiBipNet
from .sampleio import read_manifest


def _accuracy(preds: np.ndarray, labels: np.ndarray) -> float:
    return float((preds == labels).mean()) if labels.size else 0.0


def _macro_f1(preds: np.ndarray, labels: np.ndarray, n_classes: int) -> float:
    f1s = []
    for g in range(n_classes):
        tp = np.sum((preds == g) & (labels == g))
        fp = np.sum((preds == g) & (labels != g))
        fn = np.sum((preds != g) & (labels == g))
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(f1s))


def _eval_split(model: AsiBipNet, arrays, batch_size: int) -> tuple[float, float]:
    model.eval()
    preds = []
    with torch.no_grad():
        for tv, uv, _, _ in batches(arrays, batch_size, shuffle=False):
            preds.append(model(tv, uv).argmax(dim=-1))
    preds = torch.cat(preds).numpy()
    labels = arrays.labels.numpy()
    return _accuracy(preds, labels), _macro_f1(preds, labels, model.cfg.n_classes)


def save_checkpoint(path, model, stats, net_cfg, train_cfg, alpha, epoch, history, best):
    torch.save(
        {
            "model": model.state_dict(),
            "stats": stats.to_dict(),
            "network": asdict(net_cfg),
            "train": asdict(train_cfg),
            "alpha": list(alpha),
            "epoch": epoch,
            "history": history,
            "best_val_f1": best,
        },
        path,
    )


def load_checkpoint(path) -> tuple[AsiBipNet, Standardizer, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    net_cfg = NetworkConfig(**payload["network"])
    model = AsiBipNet(net_cfg)
    model.load_state_dict(payload["model"])
    model.eval()
    return model, Standardizer.from_dict(payload["stats"]), payload


def train(
    manifest_path,
    net_cfg: NetworkConfig | None = None,
    train_cfg: TrainConfig | None = None,
    out_dir=None,
    resume: bool = False,
    log=print,
):
    """Train on a dataset manifest; returns (model, stats, history).

    The training split never contains the open-set class (the loader
    refuses it and the dataset builder never puts it there). Checkpoints
    ``last.pt``/``best.pt`` and ``history.json`` land in ``out_dir``; with
    ``resume=True`` training continues from ``last.pt``.
    """
    net_cfg = net_cfg or NetworkConfig()
    train_cfg = train_cfg or TrainConfig()
    manifest = read_manifest(manifest_path)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(train_cfg.seed)
    train_arrays, stats = load_split(manifest, "train", include_open_set=False)
    val_arrays, _ = load_split(manifest, "val", stats=stats, include_open_set=False)
    if (train_arrays.labels == 6).any():
        raise ValueError("training split contains open-set samples")

    alpha = inverse_frequency_alpha(train_arrays.labels, net_cfg.n_classes)
    loss_params = FocalLossParams(gamma=train_cfg.gamma, alpha=alpha)
    model = AsiBipNet(net_cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.learning_rate, betas=train_cfg.betas)

    history = {"train_loss": [], "val_loss": [], "train_acc": [], "val_acc": [], "val_macro_f1": []}
    start_epoch = 0
    best_f1 = -1.0
    if resume and out is not None and (out / "last.pt").exists():
        payload = torch.load(out / "last.pt", map_location="cpu", weights_only=False)
        model.load_state_dict(payload["model"])
        optimizer.load_state_dict(payload["optimizer"])
        history = payload["history"]
        start_epoch = payload["epoch"] + 1
        best_f1 = payload["best_val_f1"]
        log(f"resumed from epoch {start_epoch}")

    stale = 0
    for epoch in range(start_epoch, train_cfg.epochs):
        model.train()
        losses = []
        correct = total = 0
        for b, (tv, uv, labels, _) in enumerate(
            batches(train_arrays, train_cfg.batch_size, shuffle=True, seed=train_cfg.seed + epoch)
        ):
            optimizer.zero_grad()
            logits = model(tv, uv)
            loss = focal_loss(torch.softmax(logits, dim=-1), labels, loss_params)
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite loss at epoch {epoch} batch {b}")
            loss.backward()
            optimizer.step()
            losses.append(float(loss))
            correct += int((logits.argmax(dim=-1) == labels).sum())
            total += int(labels.shape[0])

        model.eval()
        with torch.no_grad():
            val_losses = []
            for tv, uv, labels, _ in batches(val_arrays, train_cfg.batch_size, shuffle=False):
                probs = torch.softmax(model(tv, uv), dim=-1)
                val_losses.append(float(focal_loss(probs, labels, loss_params)))
        val_acc, val_f1 = _eval_split(model, val_arrays, train_cfg.batch_size)

        history["train_loss"].append(float(np.mean(losses)))
        history["val_loss"].append(float(np.mean(val_losses)))
        history["train_acc"].append(correct / max(total, 1))
        history["val_acc"].append(val_acc)
        history["val_macro_f1"].append(val_f1)
        log(
            f"epoch {epoch:3d}  loss {history['train_loss'][-1]:.4f}  "
            f"val_acc {val_acc:.3f}  val_f1 {val_f1:.3f}"
        )

        improved = val_f1 > best_f1
        if improved:
            best_f1 = val_f1
            stale = 0
        else:
            stale += 1
        if out is not None:
            if improved:
                save_checkpoint(out / "best.pt", model, stats, net_cfg, train_cfg, alpha, epoch, history, best_f1)
            torch.save(
                {
                    "model": model.state_dict(),
                    "optimizer": optimizer.state_dict(),
                    "epoch": epoch,
                    "history": history,
                    "best_val_f1": best_f1,
                    "stats": stats.to_dict(),
                    "network": asdict(net_cfg),
                    "train": asdict(train_cfg),
                    "alpha": list(alpha),
                },
                out / "last.pt",
            )
            (out / "history.json").write_text(json.dumps(history, indent=1), encoding="utf-8")
        if stale >= train_cfg.patience:
            log(f"early stop at epoch {epoch} (no val improvement in {train_cfg.patience})")
            break

    if out is not None and (out / "best.pt").exists():
        model, stats, _ = load_checkpoint(out / "best.pt")
    return model, stats, history
