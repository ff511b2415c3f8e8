"""Dual-branch asynchronous sequence classifier.

Two independent bidirectional LSTMs encode the high-rate and low-rate
tracks at their native sampling rates; neither input is interpolated,
resampled or aligned to the other. Each branch's output sequence is
average-pooled to a fixed number of tokens, projected to the model width
and concatenated with a learned classification token. A transformer
encoder applies self-attention across the joint token sequence, and a
linear head classifies from the encoded classification token.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import NetworkConfig


class BranchEncoder(nn.Module):
    """Bi-LSTM over one native-rate sequence, pooled to fixed tokens."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.lstm = nn.LSTM(
            input_size=6,
            hidden_size=cfg.lstm_hidden,
            num_layers=cfg.lstm_layers,
            bidirectional=True,
            batch_first=True,
        )
        self.pool = nn.AdaptiveAvgPool1d(cfg.tokens_per_branch)
        self.proj = nn.Linear(2 * cfg.lstm_hidden, cfg.d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (B, 6, T) -> tokens (B, tokens_per_branch, d_model)
        seq, _ = self.lstm(x.transpose(1, 2))
        pooled = self.pool(seq.transpose(1, 2)).transpose(1, 2)
        return self.proj(pooled)


class AsiBipNet(nn.Module):
    def __init__(self, cfg: NetworkConfig | None = None):
        super().__init__()
        self.cfg = cfg or NetworkConfig()
        self.branch_hi = BranchEncoder(self.cfg)
        self.branch_lo = BranchEncoder(self.cfg)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, self.cfg.d_model))
        n_tokens = 1 + 2 * self.cfg.tokens_per_branch
        self.pos_embed = nn.Parameter(torch.zeros(1, n_tokens, self.cfg.d_model))
        layer = nn.TransformerEncoderLayer(
            d_model=self.cfg.d_model,
            nhead=self.cfg.n_heads,
            dim_feedforward=2 * self.cfg.d_model,
            dropout=self.cfg.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=self.cfg.n_layers)
        self.norm = nn.LayerNorm(self.cfg.d_model)
        self.head = nn.Linear(self.cfg.d_model, self.cfg.n_classes)
        nn.init.trunc_normal_(self.cls_token, std=0.02)
        nn.init.trunc_normal_(self.pos_embed, std=0.02)

    def branch_tokens(self, p_tv: torch.Tensor, p_uv: torch.Tensor):
        """Pre-fusion branch activations (used by the independence check)."""
        return self.branch_hi(p_tv), self.branch_lo(p_uv)

    def forward(self, p_tv: torch.Tensor, p_uv: torch.Tensor) -> torch.Tensor:
        if p_tv.shape[1] != 6 or p_uv.shape[1] != 6:
            raise ValueError(f"expected 6-feature tracks, got {p_tv.shape} / {p_uv.shape}")
        hi, lo = self.branch_tokens(p_tv, p_uv)
        cls = self.cls_token.expand(hi.shape[0], -1, -1)
        tokens = torch.cat([cls, hi, lo], dim=1) + self.pos_embed
        encoded = self.encoder(tokens)
        return self.head(self.norm(encoded[:, 0]))

    @torch.no_grad()
    def confidences(self, p_tv: torch.Tensor, p_uv: torch.Tensor) -> torch.Tensor:
        self.eval()
        return torch.softmax(self.forward(p_tv, p_uv), dim=-1)


def predict_open_set(confidence: torch.Tensor, threshold: float = 0.99) -> torch.Tensor:
    """Labels 1..G from argmax confidence, or the unknown label 7 below threshold.

    Monotone in the threshold: raising it can only convert known -> unknown.
    """
    conf, arg = confidence.max(dim=-1)
    labels = arg + 1
    return torch.where(conf >= threshold, labels, torch.full_like(labels, 7))
