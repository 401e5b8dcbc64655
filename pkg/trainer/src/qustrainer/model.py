"""Toy encoder-decoder with batch-normalized conv blocks and two heads.

Four down/up levels with skip connections; both the segmentation logits and
the Nakagami regression map come out at full input resolution. Small enough
to train on a CPU, but every convolution is followed by batch
normalization so the running statistics carry the acquisition domain.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


def _block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class SegModel(nn.Module):
    """2-channel input -> (segmentation logits, Nakagami map), full resolution."""

    def __init__(self, base_width: int = 8, in_channels: int = 2):
        super().__init__()
        b = base_width
        self.enc1 = _block(in_channels, b)
        self.enc2 = _block(b, 2 * b)
        self.enc3 = _block(2 * b, 4 * b)
        self.enc4 = _block(4 * b, 8 * b)
        self.bottleneck = _block(8 * b, 16 * b)
        self.up4 = nn.ConvTranspose2d(16 * b, 8 * b, 2, stride=2)
        self.dec4 = _block(16 * b, 8 * b)
        self.up3 = nn.ConvTranspose2d(8 * b, 4 * b, 2, stride=2)
        self.dec3 = _block(8 * b, 4 * b)
        self.up2 = nn.ConvTranspose2d(4 * b, 2 * b, 2, stride=2)
        self.dec2 = _block(4 * b, 2 * b)
        self.up1 = nn.ConvTranspose2d(2 * b, b, 2, stride=2)
        self.dec1 = _block(2 * b, b)
        self.seg_head = nn.Conv2d(b, 1, 1)
        self.aux_head = nn.Conv2d(b, 1, 1)

    def forward(self, x):
        # fixed per-image, per-channel standardization: unit-max envelope
        # channels vary several-fold in mean/variance between images, which
        # would make the first BN statistics (and hence two-frame AdaBN)
        # hostage to which images are in the batch
        mu = x.mean(dim=(2, 3), keepdim=True)
        sd = x.std(dim=(2, 3), keepdim=True, unbiased=False)
        x = (x - mu) / (sd + 1e-6)
        e1 = self.enc1(x)
        e2 = self.enc2(F.max_pool2d(e1, 2))
        e3 = self.enc3(F.max_pool2d(e2, 2))
        e4 = self.enc4(F.max_pool2d(e3, 2))
        z = self.bottleneck(F.max_pool2d(e4, 2))
        d4 = self.dec4(torch.cat([self.up4(z), e4], dim=1))
        d3 = self.dec3(torch.cat([self.up3(d4), e3], dim=1))
        d2 = self.dec2(torch.cat([self.up2(d3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        return self.seg_head(d1), self.aux_head(d1)


def predict_probability(model: nn.Module, inputs, flip_average: bool = False) -> torch.Tensor:
    """FDS probability map(s) for a (2,H,W) or (N,2,H,W) input.

    With ``flip_average`` the probabilities are averaged over the four
    axis-flip orientations (speckle statistics are flip symmetric), which
    smooths boundary noise at the cost of three extra forward passes.
    """
    model.eval()
    x = torch.as_tensor(inputs, dtype=torch.float32)
    squeeze = x.dim() == 3
    if squeeze:
        x = x.unsqueeze(0)
    flips = [()] if not flip_average else [(), (-1,), (-2,), (-2, -1)]
    probs = None
    with torch.no_grad():
        for dims in flips:
            v = torch.flip(x, dims=dims) if dims else x
            logits, _ = model(v)
            p = torch.sigmoid(logits)
            if dims:
                p = torch.flip(p, dims=dims)
            probs = p if probs is None else probs + p
    probs = (probs / len(flips)).squeeze(1)
    return probs[0] if squeeze else probs
