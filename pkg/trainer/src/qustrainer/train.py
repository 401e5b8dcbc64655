"""Training loop: Adam, two-stage learning rate, best-validation checkpoint."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import torch

from .loss import mtl_loss
from .metrics import image_metrics
from .model import SegModel, predict_probability


@dataclass(frozen=True)
class TrainConfig:
    """Defaults follow the reference recipe (20 epochs, 1e-5 then 1e-6).

    That schedule assumes a pretrained backbone; training the toy model
    from scratch needs a larger learning rate, so the rates are plain
    fields rather than constants.
    """

    beta: float = 0.1
    epochs: int = 20
    lr_first: float = 1e-5
    lr_second: float = 1e-6
    lr_switch_epoch: int = 10  # epochs after this use lr_second
    batch_size: int = 8
    seed: int = 0
    base_width: int = 8
    threshold: float = 0.5
    augment_flips: bool = True

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be positive")


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _to_tensors(records, idx, rng=None):
    x = np.stack([records[i].inputs for i in idx])
    seg = np.stack([records[i].seg for i in idx])[:, None]
    m = np.stack([records[i].m_map for i in idx])[:, None]
    if rng is not None:
        # speckle statistics are symmetric under axis flips
        for k, axis in ((rng.random(len(idx)) < 0.5, -1), (rng.random(len(idx)) < 0.5, -2)):
            x[k] = np.flip(x[k], axis=axis)
            seg[k] = np.flip(seg[k], axis=axis)
            m[k] = np.flip(m[k], axis=axis)
    return (
        torch.from_numpy(np.ascontiguousarray(x)),
        torch.from_numpy(np.ascontiguousarray(seg)),
        torch.from_numpy(np.ascontiguousarray(m)),
    )


def validation_iou(model, records, threshold=0.5) -> float:
    """Mean per-image IOU of thresholded predictions."""
    ious = []
    for rec in records:
        prob = predict_probability(model, rec.inputs).numpy()
        ious.append(image_metrics(prob >= threshold, rec.seg >= 0.5)["iou"])
    return float(np.mean(ious))


def train(train_records, config: TrainConfig, val_records=None):
    """Train a SegModel; returns (best model, history dict).

    History carries per-epoch mean training loss and validation IOU. The
    returned model is the checkpoint with the best validation IOU (the
    last epoch when no validation set is given). Raises on divergence.
    """
    if not train_records:
        raise ValueError("training set is empty")
    torch.manual_seed(config.seed)
    model = SegModel(base_width=config.base_width)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr_first)
    rng = np.random.default_rng(config.seed)

    history = {"train_loss": [], "val_iou": []}
    best_state = copy.deepcopy(model.state_dict())
    best_iou = -1.0
    for epoch in range(config.epochs):
        lr = config.lr_first if epoch < config.lr_switch_epoch else config.lr_second
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        losses = []
        for idx in _batches(len(train_records), config.batch_size, rng):
            x, seg, m = _to_tensors(train_records, idx, rng if config.augment_flips else None)
            optimizer.zero_grad()
            logits, m_pred = model(x)
            loss = mtl_loss(logits, seg, m_pred, m, beta=config.beta)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch + 1}: loss={loss.item()!r}, lr={lr}"
                )
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        history["train_loss"].append(float(np.mean(losses)))
        if val_records:
            iou = validation_iou(model, val_records, config.threshold)
            history["val_iou"].append(iou)
            if iou > best_iou:
                best_iou = iou
                best_state = copy.deepcopy(model.state_dict())
        else:
            best_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)
    model.eval()
    return model, history
