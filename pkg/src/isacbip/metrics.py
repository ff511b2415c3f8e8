"""Classification evaluation: confusion matrices, P/R/F1, open-set ROC.

The ROC for unknown-behavior detection treats "known" as the positive
class with max-softmax confidence as the score: a sample is predicted
known when its score is at or above the threshold. Thresholds sweep the
unique positive-class scores (ties across classes are included
simultaneously at their shared threshold), plus the two trivial endpoints;
AUC is the trapezoid area under the resulting curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (G', G') ints, entry (i, j): truth i predicted j
    labels: tuple

    def __post_init__(self):
        c = self.counts
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] != len(self.labels):
            raise ValueError("confusion matrix must be square and match labels")
        if (c < 0).any():
            raise ValueError("confusion counts must be non-negative")


@dataclass(frozen=True)
class MetricReport:
    labels: tuple
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_f1: float
    accuracy: float  # trace / total
    mean_recall: float  # alternative "average accuracy" reading
    support: np.ndarray
    zero_division: tuple = field(default=())  # labels where a 0/0 was coerced to 0
    auc: float | None = None


def confusion(preds, truth, labels=None) -> ConfusionMatrix:
    """Count matrix with entry (i, j) = #(truth == labels[i] & pred == labels[j])."""
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {truth.shape}")
    if labels is None:
        labels = sorted(set(truth.tolist()) | set(preds.tolist()))
    labels = tuple(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    g = len(labels)
    counts = np.zeros((g, g), dtype=np.int64)
    for t, p in zip(truth.tolist(), preds.tolist()):
        if t not in index or p not in index:
            raise ValueError(f"label outside {labels}: truth={t} pred={p}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts, labels)


def prf1(cm: ConfusionMatrix) -> MetricReport:
    """Per-class precision/recall/F1 plus macro F1 and average accuracy.

    Division by zero (empty class or no predictions for a class) yields 0
    and the class is flagged in ``zero_division``.
    """
    c = cm.counts.astype(float)
    tp = np.diag(c)
    fp = c.sum(axis=0) - tp
    fn = c.sum(axis=1) - tp
    flags = []
    precision = np.zeros_like(tp)
    recall = np.zeros_like(tp)
    f1 = np.zeros_like(tp)
    for i, lab in enumerate(cm.labels):
        pd = tp[i] + fp[i]
        rd = tp[i] + fn[i]
        if pd == 0 or rd == 0:
            flags.append(lab)
        precision[i] = tp[i] / pd if pd > 0 else 0.0
        recall[i] = tp[i] / rd if rd > 0 else 0.0
        s = precision[i] + recall[i]
        f1[i] = 2.0 * precision[i] * recall[i] / s if s > 0 else 0.0
    total = c.sum()
    return MetricReport(
        labels=cm.labels,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_f1=float(f1.mean()) if f1.size else 0.0,
        accuracy=float(tp.sum() / total) if total > 0 else 0.0,
        mean_recall=float(recall.mean()) if recall.size else 0.0,
        support=c.sum(axis=1).astype(int),
        zero_division=tuple(flags),
    )


def roc_auc(scores, is_known):
    """Threshold-sweep ROC and trapezoid AUC for known-vs-unknown detection.

    Parameters
    ----------
    scores : per-sample confidence that the sample is a known class
    is_known : per-sample booleans (True = known = positive class)

    Returns
    -------
    points : (k, 2) array of (FPR, TPR) pairs, endpoints included
    auc : trapezoid area under the curve
    """
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(is_known, dtype=bool)
    n_pos = int(pos.sum())
    n_neg = int(s.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one known and one unknown sample")
    pts = [(0.0, 0.0)]
    for t in sorted(set(s[pos].tolist()), reverse=True):
        decided = s >= t
        tpr = float((decided & pos).sum()) / n_pos
        fpr = float((decided & ~pos).sum()) / n_neg
        pts.append((fpr, tpr))
    pts.append((1.0, 1.0))
    pts = np.array(sorted(set(pts)))
    auc = float(np.sum(0.5 * (pts[1:, 1] + pts[:-1, 1]) * np.diff(pts[:, 0])))
    return pts, auc


# ---------------------------------------------------------------------------
# prediction-file interface
# ---------------------------------------------------------------------------


def load_predictions(path):
    """Read line-JSON predictions: {"sample_id", "pred", "confidence": [...]}."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{ln}: bad JSON record: {exc}") from exc
            for key in ("sample_id", "pred"):
                if key not in obj:
                    raise ValueError(f"{path}:{ln}: missing field {key!r}")
            records.append(obj)
    return records


def report_to_dict(report: MetricReport) -> dict:
    out = {
        "per_class": {
            str(lab): {
                "precision": float(report.precision[i]),
                "recall": float(report.recall[i]),
                "f1": float(report.f1[i]),
                "support": int(report.support[i]),
            }
            for i, lab in enumerate(report.labels)
        },
        "macro_f1": report.macro_f1,
        "accuracy": report.accuracy,
        "mean_recall": report.mean_recall,
        "zero_division": [str(x) for x in report.zero_division],
    }
    if report.auc is not None:
        out["open_set_auc"] = report.auc
    return out


def report_table(report: MetricReport) -> str:
    """Aligned plain-text metric table."""
    rows = [("class", "precision", "recall", "f1", "support")]
    for i, lab in enumerate(report.labels):
        rows.append(
            (
                str(lab),
                f"{report.precision[i]:.4f}",
                f"{report.recall[i]:.4f}",
                f"{report.f1[i]:.4f}",
                str(int(report.support[i])),
            )
        )
    rows.append(("macro_f1", "", "", f"{report.macro_f1:.4f}", ""))
    rows.append(("accuracy", "", "", f"{report.accuracy:.4f}", ""))
    if report.auc is not None:
        rows.append(("open_set_auc", "", "", f"{report.auc:.4f}", ""))
    widths = [max(len(r[c]) for r in rows) for c in range(5)]
    lines = ["  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines)
