"""Scikit-learn style wrappers around the map estimators and classifier.

These let the windowed statistics and the reference-phantom rule compose
with sklearn tooling (``get_params``/``set_params``, cloning, pipelines
over lists of frames). Frames can be passed as ``EnvelopeFrame`` objects
or as bare 2D arrays, in which case pixel pitches from the constructor are
used to wrap them.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .classify import (
    DEFAULT_TOLERANCE,
    ClassMap,
    build_reference_profile,
    reference_classify,
    snr_map,
)
from .stats import ParametricImage
from .errors import ConfigurationError
from .grid import GridSpec
from .simulator import EnvelopeFrame
from .stats import STATISTICS, WindowSpec, parametric_image


def as_envelope_frame(x, d_axial: float = 1.0, d_lateral: float = 1.0) -> EnvelopeFrame:
    """Wrap a bare 2D array as an EnvelopeFrame (no-op for frames)."""
    if isinstance(x, EnvelopeFrame):
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigurationError("envelope data must be a 2D array")
    grid = GridSpec(arr.shape[0], arr.shape[1], d_axial, d_lateral)
    return EnvelopeFrame(data=arr, grid=grid, params=None)


def _frame_list(X, d_axial, d_lateral):
    if isinstance(X, EnvelopeFrame) or (isinstance(X, np.ndarray) and X.ndim == 2):
        X = [X]
    return [as_envelope_frame(f, d_axial, d_lateral) for f in X]


class ParametricImageEstimator(BaseEstimator, TransformerMixin):
    """Stateless transformer computing windowed statistic maps.

    ``transform`` maps each input frame to the 2D array of windowed
    statistic values (NaN marks degenerate windows).
    """

    def __init__(
        self,
        statistic: str = "snr",
        window_height: int = 64,
        window_width: int = 64,
        stride_axial: int = 16,
        stride_lateral: int = 16,
        min_cell_multiple: float = 0.0,
        resolution_cell: tuple[float, float] | None = None,
        d_axial: float = 1.0,
        d_lateral: float = 1.0,
    ):
        self.statistic = statistic
        self.window_height = window_height
        self.window_width = window_width
        self.stride_axial = stride_axial
        self.stride_lateral = stride_lateral
        self.min_cell_multiple = min_cell_multiple
        self.resolution_cell = resolution_cell
        self.d_axial = d_axial
        self.d_lateral = d_lateral

    def _window(self) -> WindowSpec:
        return WindowSpec(
            height=self.window_height,
            width=self.window_width,
            stride_a=self.stride_axial,
            stride_l=self.stride_lateral,
            min_cell_multiple=self.min_cell_multiple,
        )

    def fit(self, X=None, y=None):
        if self.statistic not in STATISTICS:
            raise ConfigurationError(f"unknown statistic {self.statistic!r}")
        self._window()  # validates window geometry
        return self

    def transform(self, X):
        self.fit()
        frames = _frame_list(X, self.d_axial, self.d_lateral)
        maps = [
            parametric_image(f, self._window(), self.statistic, self.resolution_cell).values
            for f in frames
        ]
        return maps[0] if len(maps) == 1 else maps


class ReferencePhantomClassifier(BaseEstimator):
    """Depth-matched SNR comparison against a fitted reference profile.

    ``fit`` consumes frames of the reference (high-density) phantom;
    ``predict`` labels every analysis window of a test frame as
    0 (UDS), 1 (FDS) or 2 (non-resolved periodicity).
    """

    def __init__(
        self,
        window_height: int = 64,
        window_width: int = 64,
        stride_axial: int = 16,
        stride_lateral: int = 16,
        tolerance: float = DEFAULT_TOLERANCE,
        d_axial: float = 1.0,
        d_lateral: float = 1.0,
    ):
        self.window_height = window_height
        self.window_width = window_width
        self.stride_axial = stride_axial
        self.stride_lateral = stride_lateral
        self.tolerance = tolerance
        self.d_axial = d_axial
        self.d_lateral = d_lateral

    def _window(self) -> WindowSpec:
        return WindowSpec(
            height=self.window_height,
            width=self.window_width,
            stride_a=self.stride_axial,
            stride_l=self.stride_lateral,
            min_cell_multiple=0.0,
        )

    def fit(self, X, y=None):
        frames = _frame_list(X, self.d_axial, self.d_lateral)
        self.profile_ = build_reference_profile(frames, self._window())
        return self

    def _check_fitted(self):
        if not hasattr(self, "profile_"):
            raise NotFittedError("call fit with reference frames first")

    def classify_frames(self, X) -> ClassMap:
        """Classify one test subject imaged over one or more frames.

        SNR maps of the frames are averaged before applying the tolerance
        band, which is how reference-phantom comparisons are normally run;
        single-frame window SNR is noisy relative to a few-percent band.
        """
        self._check_fitted()
        frames = _frame_list(X, self.d_axial, self.d_lateral)
        window = self._window()
        maps = [snr_map(f, window) for f in frames]
        mean_map = maps[0]
        if len(maps) > 1:
            mean_map = ParametricImage(
                values=np.mean([m.values for m in maps], axis=0),
                statistic="snr",
                window=window,
                source_shape=maps[0].source_shape,
            )
        return reference_classify(mean_map, self.profile_, self.tolerance)

    def predict(self, X):
        """Window labels (0 UDS, 1 FDS, 2 periodic) for the averaged frames."""
        return self.classify_frames(X).labels
