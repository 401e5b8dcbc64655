"""First-order speckle statistics and sliding-window parametric images.

Scalar patch estimators (SNR, skewness, Nakagami by moments and by maximum
likelihood) plus their sliding-window map versions, and a correlation-based
measurement of the resolution-cell size. All statistics use population
(biased) variance so results are exactly reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._special import digamma, gammaln, trigamma
from .errors import (
    ConfigurationError,
    DegenerateDataError,
    InvalidSampleError,
    NumericError,
    WindowTooSmallError,
)
from .simulator import EnvelopeFrame

MIN_PATCH_SAMPLES = 64
STATISTICS = ("snr", "skewness", "nakagami_m", "nakagami_omega")

_ML_TOL = 1e-10
_ML_MAX_ITER = 100
# a patch is degenerate when its spread is below this fraction of its RMS;
# catches exactly-constant patches whose float variance is rounding noise
_DEGENERATE_REL = 1e-12


def _variance_degenerate(var: float, mean_sq: float) -> bool:
    return var <= _DEGENERATE_REL**2 * mean_sq


@dataclass(frozen=True)
class WindowSpec:
    """Sliding analysis window in pixels.

    ``min_cell_multiple`` is the required ratio of window extent to
    resolution-cell extent per axis (set 0 to disable the check when the
    cell size is supplied).
    """

    height: int
    width: int
    stride_a: int
    stride_l: int
    min_cell_multiple: float = 8.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigurationError("window dimensions must be positive")
        if self.height * self.width < MIN_PATCH_SAMPLES:
            raise ConfigurationError(
                f"window must contain at least {MIN_PATCH_SAMPLES} samples"
            )
        if self.stride_a < 1 or self.stride_l < 1:
            raise ConfigurationError("strides must be at least 1")
        if self.min_cell_multiple < 0:
            raise ConfigurationError("min_cell_multiple must be non-negative")

    def geometry(self) -> tuple[int, int, int, int]:
        return (self.height, self.width, self.stride_a, self.stride_l)

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "stride_a": self.stride_a,
            "stride_l": self.stride_l,
            "min_cell_multiple": self.min_cell_multiple,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSpec":
        return cls(
            height=int(d["height"]),
            width=int(d["width"]),
            stride_a=int(d["stride_a"]),
            stride_l=int(d["stride_l"]),
            min_cell_multiple=float(d.get("min_cell_multiple", 8.0)),
        )


@dataclass(frozen=True)
class NakagamiEstimate:
    m: float
    omega: float
    n: int
    method: str


@dataclass(frozen=True)
class ParametricImage:
    """Windowed statistic map with the provenance to locate each window."""

    values: np.ndarray
    statistic: str
    window: WindowSpec
    source_shape: tuple[int, int]

    def window_origin(self, i: int, j: int) -> tuple[int, int]:
        """Top-left source pixel of map entry (i, j)."""
        return (i * self.window.stride_a, j * self.window.stride_l)

    def window_center(self, i: int, j: int) -> tuple[float, float]:
        """Source pixel coordinates of the center of map entry (i, j)."""
        oa, ol = self.window_origin(i, j)
        return (oa + (self.window.height - 1) / 2.0, ol + (self.window.width - 1) / 2.0)


def _as_patch(patch, min_samples: int = MIN_PATCH_SAMPLES) -> np.ndarray:
    x = np.asarray(patch, dtype=np.float64).ravel()
    if x.size < min_samples:
        raise ConfigurationError(
            f"patch has {x.size} samples; at least {min_samples} required"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidSampleError("patch contains non-finite samples")
    return x


def patch_snr(patch) -> float:
    """Envelope SNR: mean over population standard deviation."""
    x = _as_patch(patch)
    v = float(x.var())
    if _variance_degenerate(v, float(np.mean(x * x))):
        raise DegenerateDataError("zero variance; SNR undefined")
    return float(x.mean() / np.sqrt(v))


def patch_skewness(patch) -> float:
    """Third standardized central moment (population normalization)."""
    x = _as_patch(patch)
    m = x.mean()
    v = float(x.var())
    if _variance_degenerate(v, float(np.mean(x * x))):
        raise DegenerateDataError("zero variance; skewness undefined")
    return float(np.mean((x - m) ** 3) / v**1.5)


def nakagami_moments(patch) -> NakagamiEstimate:
    """Moment-based Nakagami fit: omega = E[A^2], m = omega^2 / Var[A^2]."""
    x = _as_patch(patch)
    if np.any(x < 0):
        raise InvalidSampleError("envelope samples must be non-negative")
    sq = x * x
    omega = float(sq.mean())
    v = float(sq.var())
    if _variance_degenerate(v, float(np.mean(sq * sq))):
        raise DegenerateDataError("Var[A^2] is zero; moment fit undefined")
    return NakagamiEstimate(m=omega * omega / v, omega=omega, n=x.size, method="moments")


def _gamma_shape_newton(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve log(m) - psi(m) = s for each positive s.

    Returns (m, converged). Newton iteration from the rational closed-form
    start; the objective is strictly decreasing in m so the root is unique.
    """
    m = (3.0 - s + np.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    active = np.ones(s.shape, dtype=bool)
    for _ in range(_ML_MAX_ITER):
        if not np.any(active):
            break
        ma = m[active]
        step = (np.log(ma) - digamma(ma) - s[active]) / (1.0 / ma - trigamma(ma))
        new = ma - step
        # keep iterates positive; halve towards zero instead of overshooting
        bad = new <= 0
        new[bad] = ma[bad] / 2.0
        m[active] = new
        still = np.abs(step) >= _ML_TOL
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
    return m, ~active


def nakagami_ml(patch) -> NakagamiEstimate:
    """Maximum-likelihood Nakagami fit.

    Equivalent to Gamma-shape ML on the intensity x = A^2: omega = mean(x)
    and m solves log(m) - psi(m) = log(mean x) - mean(log x).
    """
    x = _as_patch(patch)
    if np.any(x <= 0):
        raise InvalidSampleError("maximum-likelihood fit requires strictly positive samples")
    sq = x * x
    omega = float(sq.mean())
    s = float(np.log(omega) - np.mean(np.log(sq)))
    if s <= _DEGENERATE_REL:
        raise DegenerateDataError("degenerate intensity statistics (constant samples?)")
    m, ok = _gamma_shape_newton(np.array([s]))
    if not ok[0]:
        raise NumericError(f"Nakagami ML did not converge in {_ML_MAX_ITER} iterations")
    return NakagamiEstimate(m=float(m[0]), omega=omega, n=x.size, method="ml")


def nakagami_logpdf(a, m: float, omega: float):
    """Log-density of the Nakagami amplitude distribution."""
    if m <= 0 or omega <= 0:
        raise ConfigurationError("m and omega must be positive")
    a = np.asarray(a, dtype=np.float64)
    if np.any(a <= 0):
        raise InvalidSampleError("density is supported on positive amplitudes")
    return (
        np.log(2.0)
        + m * np.log(m)
        - gammaln(m)
        - m * np.log(omega)
        + (2.0 * m - 1.0) * np.log(a)
        - m * a * a / omega
    )


def _window_views(data: np.ndarray, window: WindowSpec) -> np.ndarray:
    h, w, sa, sl = window.geometry()
    if data.shape[0] < h or data.shape[1] < w:
        raise ConfigurationError("window larger than the source frame")
    return sliding_window_view(data, (h, w))[::sa, ::sl]


def parametric_image(
    env: EnvelopeFrame,
    window: WindowSpec,
    statistic: str,
    rescell: tuple[float, float] | None = None,
) -> ParametricImage:
    """Evaluate a statistic on every window position of an envelope frame.

    When ``rescell`` (axial, lateral extent in mm) is given, the window must
    span at least ``window.min_cell_multiple`` resolution cells per axis.
    Windows with degenerate content produce NaN entries rather than errors.
    """
    if statistic not in STATISTICS:
        raise ConfigurationError(f"unknown statistic {statistic!r}; expected one of {STATISTICS}")
    if rescell is not None and window.min_cell_multiple > 0:
        need_a = window.min_cell_multiple * rescell[0]
        need_l = window.min_cell_multiple * rescell[1]
        have_a = window.height * env.grid.d_axial
        have_l = window.width * env.grid.d_lateral
        if have_a < need_a or have_l < need_l:
            raise WindowTooSmallError(
                f"window {have_a:.2f}x{have_l:.2f} mm is below "
                f"{window.min_cell_multiple}x the resolution cell "
                f"({rescell[0]:.2f}x{rescell[1]:.2f} mm)"
            )

    # Statistics are computed from window means of powers of the data so the
    # strided window views are reduced without materializing copies.
    data = np.asarray(env.data, dtype=np.float64)
    sq = data * data

    def window_mean(img):
        return _window_views(img, window).mean(axis=(-2, -1))

    if statistic == "snr":
        mean = window_mean(data)
        mean2 = window_mean(sq)
        var = mean2 - mean * mean
        ok = var > _DEGENERATE_REL**2 * mean2
        values = np.where(ok, mean / np.sqrt(np.where(ok, var, 1.0)), np.nan)
    elif statistic == "skewness":
        mean = window_mean(data)
        mean2 = window_mean(sq)
        mean3 = window_mean(sq * data)
        var = mean2 - mean * mean
        m3 = mean3 - 3.0 * mean * mean2 + 2.0 * mean**3
        ok = var > _DEGENERATE_REL**2 * mean2
        values = np.where(ok, m3 / np.where(ok, var, 1.0) ** 1.5, np.nan)
    elif statistic == "nakagami_omega":
        omega = window_mean(sq)
        values = np.where(omega > 0, omega, np.nan)
    else:  # nakagami_m, maximum likelihood
        omega = window_mean(sq)
        valid = _window_views(data, window).min(axis=(-2, -1)) > 0
        values = np.full(omega.shape, np.nan)
        if np.any(valid):
            with np.errstate(divide="ignore", invalid="ignore"):
                log_sq = np.log(sq, where=sq > 0, out=np.full_like(sq, -np.inf))
                s = np.where(omega > 0, np.log(np.where(omega > 0, omega, 1.0)), -np.inf)
                s = s - window_mean(log_sq)
            solvable = valid & np.isfinite(s) & (s > _DEGENERATE_REL)
            if np.any(solvable):
                m, ok = _gamma_shape_newton(s[solvable])
                m[~ok] = np.nan
                values[solvable] = m

    return ParametricImage(
        values=values,
        statistic=statistic,
        window=window,
        source_shape=(data.shape[0], data.shape[1]),
    )


def _fwhm_from_profile(profile: np.ndarray, pitch: float) -> float:
    below = np.flatnonzero(profile < 0.5)
    if below.size == 0:
        raise DegenerateDataError("autocovariance does not decay below half maximum")
    k = int(below[0])
    if k == 0:
        raise DegenerateDataError("autocovariance peak is not at zero lag")
    frac = (profile[k - 1] - 0.5) / (profile[k - 1] - profile[k])
    return 2.0 * (k - 1 + frac) * pitch


def correlation_cell_size(env: EnvelopeFrame) -> tuple[float, float]:
    """Resolution-cell extent from the envelope autocovariance.

    Returns the full width at half maximum of the normalized autocovariance
    of the mean-removed envelope along the axial and lateral axes, in mm.
    """
    data = np.asarray(env.data, dtype=np.float64)
    n_a, n_l = data.shape
    if n_a < 128 or n_l < 128:
        raise ConfigurationError("correlation cell measurement needs at least 128x128 samples")
    x = data - data.mean()
    if float(np.mean(x * x)) == 0.0:
        raise DegenerateDataError("flat envelope; autocovariance undefined")
    spec = np.fft.rfft2(x, s=(2 * n_a, 2 * n_l))
    acov = np.fft.irfft2(np.abs(spec) ** 2, s=(2 * n_a, 2 * n_l))
    rho = acov / acov[0, 0]
    axial = _fwhm_from_profile(rho[: n_a // 2, 0], env.grid.d_axial)
    lateral = _fwhm_from_profile(rho[0, : n_l // 2], env.grid.d_lateral)
    return (axial, lateral)
