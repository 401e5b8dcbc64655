"""Reference-phantom classification of speckle development.

A reference profile of envelope SNR per depth row is built from frames of a
known high-density phantom. Test windows are compared against the profile
row at the same depth: within the relative tolerance band is fully
developed speckle (FDS), below is under-developed speckle (UDS), above is
non-resolved periodicity. The boundary (difference exactly at the
tolerance) counts as FDS.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ConfigurationError, DegenerateDataError
from .simulator import EnvelopeFrame
from .stats import ParametricImage, WindowSpec, parametric_image

DEFAULT_TOLERANCE = 0.03


class Label(IntEnum):
    UDS = 0
    FDS = 1
    PERIODIC = 2


@dataclass(frozen=True)
class ReferenceProfile:
    """Depth profile of reference SNR.

    ``snr_by_depth[i]`` is the mean SNR of window row i pooled over lateral
    positions and frames; ``dispersion_by_depth`` is the standard error of
    that mean, so it shrinks as frames are added.
    """

    snr_by_depth: np.ndarray
    dispersion_by_depth: np.ndarray
    frames_used: int
    window: WindowSpec

    def __post_init__(self):
        if self.frames_used < 1:
            raise ConfigurationError("profile needs at least one frame")
        if np.any(~np.isfinite(self.snr_by_depth)) or np.any(self.snr_by_depth <= 0):
            raise DegenerateDataError("reference SNR profile must be finite and positive")


@dataclass(frozen=True)
class ClassMap:
    """Per-window speckle class labels."""

    labels: np.ndarray
    tolerance: float
    window: WindowSpec


def snr_map(frame: EnvelopeFrame, window: WindowSpec) -> ParametricImage:
    """SNR parametric image of one envelope frame (cell-size check off)."""
    return parametric_image(frame, window, "snr", rescell=None)


def build_reference_profile(frames, window: WindowSpec) -> ReferenceProfile:
    """Pool SNR parametric values per depth row across frames.

    All frames must share dimensions; the profile row count equals the SNR
    map row count for the given window.
    """
    frames = list(frames)
    if not frames:
        raise ConfigurationError("at least one reference frame is required")
    shape = frames[0].data.shape
    for f in frames[1:]:
        if f.data.shape != shape:
            raise ConfigurationError("reference frames must share dimensions")
    maps = [snr_map(f, window).values for f in frames]
    stacked = np.stack(maps)  # (frame, depth_row, lateral)
    if np.any(~np.isfinite(stacked)):
        raise DegenerateDataError("reference frames produced degenerate SNR windows")
    pooled = stacked.transpose(1, 0, 2).reshape(stacked.shape[1], -1)
    mean = pooled.mean(axis=1)
    sem = pooled.std(axis=1) / np.sqrt(pooled.shape[1])
    return ReferenceProfile(
        snr_by_depth=mean,
        dispersion_by_depth=sem,
        frames_used=len(frames),
        window=window,
    )


def reference_classify(
    test_snr: ParametricImage,
    ref: ReferenceProfile,
    tolerance: float = DEFAULT_TOLERANCE,
) -> ClassMap:
    """Label every test window by depth-matched comparison to the reference."""
    if test_snr.statistic != "snr":
        raise ConfigurationError("classification expects an SNR parametric image")
    if tolerance < 0:
        raise ConfigurationError("tolerance must be non-negative")
    if test_snr.window.geometry() != ref.window.geometry():
        raise ConfigurationError(
            "test and reference window specs differ; rebuild with matching windows"
        )
    values = test_snr.values
    if values.shape[0] != ref.snr_by_depth.shape[0]:
        raise ConfigurationError(
            f"test map has {values.shape[0]} depth rows, reference profile "
            f"{ref.snr_by_depth.shape[0]}"
        )
    if np.any(~np.isfinite(values)):
        raise DegenerateDataError("test SNR map contains degenerate windows")
    ref_col = ref.snr_by_depth[:, None]
    band = tolerance * ref_col
    labels = np.full(values.shape, Label.FDS, dtype=np.int8)
    labels[values < ref_col - band] = Label.UDS
    labels[values > ref_col + band] = Label.PERIODIC
    return ClassMap(labels=labels, tolerance=tolerance, window=test_snr.window)


def summarize_homogeneous(class_map: ClassMap, true_label: Label) -> dict:
    """Per-class fractions and accuracy against a single true label."""
    labels = class_map.labels
    total = labels.size
    fractions = {
        lab.name.lower(): float(np.count_nonzero(labels == lab) / total) for lab in Label
    }
    accuracy = float(np.count_nonzero(labels == true_label) / total)
    return {"fractions": fractions, "accuracy": accuracy, "n_windows": int(total)}
