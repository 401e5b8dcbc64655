"""Dataset loading: envelope channels, segmentation and Nakagami targets.

Network inputs are two channels derived from the envelope A normalized to
unit per-image maximum: the normalized envelope itself and its A*log(A)
companion (natural log, with 0*log(0) = 0). The segmentation target is the
scatterer-density mask re-expressed as FDS-vs-UDS using the sample's
``fds_label``; the Nakagami target is the windowed m map resampled to pixel
resolution at the window centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qusd_io import QusdError, Sample, iter_split


@dataclass(frozen=True)
class Record:
    inputs: np.ndarray  # (2, H, W) float32
    seg: np.ndarray  # (H, W) float32, 1 = FDS
    m_map: np.ndarray  # (H, W) float32
    meta: dict


def envelope_channels(env: np.ndarray) -> np.ndarray:
    """(A, A*log A) with A scaled to unit maximum."""
    env = np.asarray(env, dtype=np.float64)
    peak = env.max()
    if peak <= 0:
        raise QusdError("envelope tensor is non-positive everywhere")
    a = env / peak
    with np.errstate(divide="ignore", invalid="ignore"):
        alog = np.where(a > 0, a * np.log(a), 0.0)
    return np.stack([a, alog]).astype(np.float32)


def _window_centers(n_source, extent, stride, n_out):
    return extent / 2.0 - 0.5 + stride * np.arange(n_out)


def resample_map_to_pixels(values, window_meta, shape) -> np.ndarray:
    """Bilinear resample of a windowed map onto the source pixel grid.

    Map entries live at their window centers; pixels beyond the outermost
    centers take the edge value.
    """
    values = np.asarray(values, dtype=np.float64)
    if np.isnan(values).any():
        fill = np.nanmean(values) if np.isfinite(values).any() else 1.0
        values = np.where(np.isnan(values), fill, values)
    rows = _window_centers(shape[0], window_meta["height"], window_meta["stride_a"], values.shape[0])
    cols = _window_centers(shape[1], window_meta["width"], window_meta["stride_l"], values.shape[1])
    out_rows = np.arange(shape[0], dtype=np.float64)
    out_cols = np.arange(shape[1], dtype=np.float64)
    # separable linear interpolation with edge extension
    tmp = np.empty((shape[0], values.shape[1]))
    for j in range(values.shape[1]):
        tmp[:, j] = np.interp(out_rows, rows, values[:, j])
    out = np.empty(shape)
    for i in range(shape[0]):
        out[i, :] = np.interp(out_cols, cols, tmp[i, :])
    return out.astype(np.float32)


def record_from_sample(sample: Sample, axial_decimation: int = 1) -> Record:
    """Build one training record; optionally keep every k-th axial row.

    Simulated grids sample the RF axially far more densely than laterally;
    plain subsampling leaves the envelope statistics untouched while making
    the speckle texture roughly isotropic for the network.
    """
    if axial_decimation < 1:
        raise ValueError("axial_decimation must be >= 1")
    tensors = sample.tensors
    for name in ("env", "sc_mask"):
        if name not in tensors:
            raise QusdError(f"sample lacks required tensor {name!r}")
    env = tensors["env"]
    inputs = envelope_channels(env)
    fds_label = int(sample.meta.get("fds_label", 1))
    seg = (tensors["sc_mask"] == fds_label).astype(np.float32)
    if "nakagami_m" in tensors and "nakagami_window" in sample.meta:
        m_map = resample_map_to_pixels(
            tensors["nakagami_m"], sample.meta["nakagami_window"], env.shape
        )
    else:
        m_map = np.zeros(env.shape, dtype=np.float32)
    k = axial_decimation
    return Record(
        inputs=inputs[:, ::k, :].copy(),
        seg=seg[::k, :].copy(),
        m_map=m_map[::k, :].copy(),
        meta=sample.meta,
    )


def load_dataset(
    manifest_path, split: str, verify: bool = True, axial_decimation: int = 1
) -> list:
    """Records of one split, digests verified, in index order."""
    return [
        record_from_sample(s, axial_decimation=axial_decimation)
        for s in iter_split(manifest_path, split, verify=verify)
    ]
