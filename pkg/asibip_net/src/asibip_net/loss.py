"""Focal classification loss.

For one sample with true class g, predicted probabilities p and class
weights alpha, the loss is -alpha_g * (1 - p_g)^gamma * log(p_g); the
batch loss is the mean. gamma = 0 with unit weights reduces to plain
cross-entropy.
"""

from __future__ import annotations

import torch

from .config import FocalLossParams

EPS = 1e-8


def focal_loss(probs: torch.Tensor, labels: torch.Tensor, params: FocalLossParams) -> torch.Tensor:
    """Mean focal loss over a batch.

    Parameters
    ----------
    probs : (B, G) rows on the probability simplex
    labels : (B,) class indices in 0..G-1
    params : gamma and optional per-class alpha weights

    Zero probability at the true class is clamped at 1e-8 (the gradient
    there is still finite through the clamp).
    """
    if probs.ndim != 2 or labels.shape[0] != probs.shape[0]:
        raise ValueError(f"shape mismatch: probs {tuple(probs.shape)}, labels {tuple(labels.shape)}")
    p_true = probs.gather(1, labels.view(-1, 1)).squeeze(1).clamp_min(EPS)
    if params.alpha is None:
        alpha = torch.ones_like(p_true)
    else:
        table = torch.as_tensor(params.alpha, dtype=probs.dtype, device=probs.device)
        if table.shape[0] != probs.shape[1]:
            raise ValueError("alpha length must equal the class count")
        alpha = table[labels]
    return (-alpha * (1.0 - p_true) ** params.gamma * torch.log(p_true)).mean()


def inverse_frequency_alpha(labels, n_classes: int) -> tuple:
    """Per-class weights proportional to inverse frequency, mean-normalized to 1."""
    counts = torch.bincount(torch.as_tensor(labels), minlength=n_classes).clamp_min(1).double()
    w = 1.0 / counts
    return tuple((w / w.mean()).tolist())
