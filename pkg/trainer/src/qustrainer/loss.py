"""Multi-task loss: binary cross entropy + Dice + weighted smooth L1."""

from __future__ import annotations

import torch
import torch.nn.functional as F

DICE_EPS = 1.0


def dice_loss(probs: torch.Tensor, target: torch.Tensor, eps: float = DICE_EPS) -> torch.Tensor:
    """1 - 2|P.G| / (|P| + |G|) on soft predictions, smoothed by eps.

    Computed per image and averaged over the batch; the eps term makes the
    empty-prediction/empty-target case come out as zero loss.
    """
    dims = tuple(range(1, probs.dim()))
    inter = (probs * target).sum(dim=dims)
    total = probs.sum(dim=dims) + target.sum(dim=dims)
    return (1.0 - (2.0 * inter + eps) / (total + eps)).mean()


def mtl_loss(
    pred_seg_logits: torch.Tensor,
    gt_seg: torch.Tensor,
    pred_m: torch.Tensor,
    gt_m: torch.Tensor,
    beta: float = 0.1,
) -> torch.Tensor:
    """BCE(seg) + Dice(seg) + beta * SmoothL1(m)."""
    if pred_seg_logits.shape != gt_seg.shape or pred_m.shape != gt_m.shape:
        raise ValueError("prediction and target shapes must match")
    bce = F.binary_cross_entropy_with_logits(pred_seg_logits, gt_seg)
    dice = dice_loss(torch.sigmoid(pred_seg_logits), gt_seg)
    aux = F.smooth_l1_loss(pred_m, gt_m)
    return bce + dice + beta * aux
