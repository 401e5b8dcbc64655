"""Segmentation metrics with whole-set and worst-k% aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("iou", "accuracy", "sensitivity", "precision", "f1")


def _safe(num, den):
    # empty denominators mean no errors were possible; count as perfect
    return num / den if den > 0 else 1.0


def image_metrics(pred: np.ndarray, gt: np.ndarray) -> dict:
    """Confusion-based metrics for one binary mask pair."""
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ValueError("prediction and ground truth shapes differ")
    tp = float(np.count_nonzero(pred & gt))
    fp = float(np.count_nonzero(pred & ~gt))
    fn = float(np.count_nonzero(~pred & gt))
    tn = float(np.count_nonzero(~pred & ~gt))
    precision = _safe(tp, tp + fp)
    sensitivity = _safe(tp, tp + fn)
    return {
        "iou": _safe(tp, tp + fp + fn),
        "accuracy": _safe(tp + tn, tp + fp + fn + tn),
        "sensitivity": sensitivity,
        "precision": precision,
        "f1": _safe(2 * precision * sensitivity, precision + sensitivity),
    }


def pooled_auc(probs, gts) -> float:
    """Rank-based AUC over per-pixel probabilities pooled across images."""
    scores = np.concatenate([np.asarray(p, dtype=np.float64).ravel() for p in probs])
    labels = np.concatenate([np.asarray(g).astype(bool).ravel() for g in gts])
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return 1.0
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(labels.size, dtype=np.float64)
    ranks[order] = np.arange(1, labels.size + 1)
    # average ranks within tied score groups
    sorted_scores = scores[order]
    boundaries = np.flatnonzero(np.diff(sorted_scores) != 0) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [labels.size]])
    for s, e in zip(starts, ends):
        if e - s > 1:
            ranks[order[s:e]] = 0.5 * (s + 1 + e)
    rank_sum = ranks[labels].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass(frozen=True)
class MetricsReport:
    """Mean (and spread) of each metric on the full set and worst subsets."""

    full: dict
    worst10: dict
    worst5: dict
    auc: float
    per_image: dict

    def to_dict(self) -> dict:
        return {
            "full": self.full,
            "worst10": self.worst10,
            "worst5": self.worst5,
            "auc": self.auc,
        }


def _aggregate(values: np.ndarray, k_fraction: float | None) -> tuple[float, float]:
    if k_fraction is not None:
        k = max(1, int(round(k_fraction * values.size)))
        values = np.sort(values)[:k]
    return float(values.mean()), float(values.std())


def evaluate(preds, gts, probs=None) -> MetricsReport:
    """Per-image metrics plus whole-set / worst-10% / worst-5% summaries.

    The worst subsets are selected per metric (each metric sorted
    independently, ascending). ``probs`` enables the pooled AUC.
    """
    preds = list(preds)
    gts = list(gts)
    if len(preds) != len(gts) or not preds:
        raise ValueError("need equally many predictions and ground truths")
    per_image = {name: [] for name in METRIC_NAMES}
    for p, g in zip(preds, gts):
        stats = image_metrics(p, g)
        for name in METRIC_NAMES:
            per_image[name].append(stats[name])
    per_image = {name: np.array(vals) for name, vals in per_image.items()}
    full = {name: _aggregate(vals, None) for name, vals in per_image.items()}
    worst10 = {name: _aggregate(vals, 0.10) for name, vals in per_image.items()}
    worst5 = {name: _aggregate(vals, 0.05) for name, vals in per_image.items()}
    auc = pooled_auc(probs, gts) if probs is not None else float("nan")
    return MetricsReport(full=full, worst10=worst10, worst5=worst5, auc=auc, per_image=per_image)
