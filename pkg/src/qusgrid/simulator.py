"""Gaussian-cosine PSF construction and grid-based RF/envelope synthesis.

The scatterer grid is convolved with a separable PSF: a 2D Gaussian
envelope modulated axially by a cosine carrier at the pulse-echo (two-way)
spatial frequency 2*f_c/v. Convolution is shift invariant (homogeneous PSF
across the image), computed in the frequency domain, with optional additive
white Gaussian noise scaled to the RF RMS.

Units: frequencies in MHz, speed of sound in m/s, lengths in mm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, hilbert

from .errors import ConfigurationError, DegenerateDataError
from .grid import GridSpec, substream
from .phantom import HALF_POWER_WIDTH_FACTOR, ScattererMap

# Imaging-parameter ranges used when sampling acquisitions
FC_RANGE = (4.0, 7.0)  # MHz
FS_RANGE = (60.0, 100.0)  # MHz
V_RANGE = (1510.0, 1560.0)  # m/s
SIGMA_A_RANGE = (0.1, 0.3)  # mm
SIGMA_L_RANGE = (0.13, 0.4)  # mm
F_NUMBER_RANGE = (1.5, 2.5)
N_PULSES_CHOICES = (3, 4, 5)
NOISE_STD_RANGE = (0.0, 0.05)  # fraction of RF RMS

_PARAMS_STREAM = 3
_NOISE_STREAM = 4

DEFAULT_DYNAMIC_RANGE_DB = 50.0


@dataclass(frozen=True)
class ImagingParams:
    """Acquisition parameters for one synthetic frame.

    Construction only checks positivity; ``sample_imaging_params``
    guarantees the documented ranges. ``f_number`` is carried as metadata
    (the lateral PSF width is specified directly by ``sigma_l``).
    """

    f_c: float
    f_s: float
    v: float
    sigma_a: float
    sigma_l: float
    f_number: float = 2.0
    n_pulses: int = 4
    noise_std: float = 0.0

    def __post_init__(self):
        positive = {
            "f_c": self.f_c,
            "f_s": self.f_s,
            "v": self.v,
            "sigma_a": self.sigma_a,
            "sigma_l": self.sigma_l,
            "f_number": self.f_number,
            "n_pulses": self.n_pulses,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be non-negative")

    @property
    def d_axial(self) -> float:
        """RF axial pixel pitch in mm: two-way travel sampled at f_s."""
        return self.v / (2000.0 * self.f_s)

    @property
    def carrier_period(self) -> float:
        """Axial spatial period of the pulse-echo carrier in mm, v/(2 f_c)."""
        return self.v / (2000.0 * self.f_c)

    def to_dict(self) -> dict:
        return {
            "f_c": self.f_c,
            "f_s": self.f_s,
            "v": self.v,
            "sigma_a": self.sigma_a,
            "sigma_l": self.sigma_l,
            "f_number": self.f_number,
            "n_pulses": self.n_pulses,
            "noise_std": self.noise_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImagingParams":
        return cls(
            f_c=float(d["f_c"]),
            f_s=float(d["f_s"]),
            v=float(d["v"]),
            sigma_a=float(d["sigma_a"]),
            sigma_l=float(d["sigma_l"]),
            f_number=float(d["f_number"]),
            n_pulses=int(d["n_pulses"]),
            noise_std=float(d["noise_std"]),
        )


@dataclass(frozen=True)
class Psf:
    """Sampled point spread function kernel with its pitches."""

    kernel: np.ndarray
    d_axial: float
    d_lateral: float
    support: float  # axial half-length in mm


@dataclass(frozen=True)
class RfFrame:
    data: np.ndarray
    grid: GridSpec
    params: ImagingParams | None = None


@dataclass(frozen=True)
class EnvelopeFrame:
    data: np.ndarray
    grid: GridSpec
    params: ImagingParams | None = None


@dataclass(frozen=True)
class BmodeFrame:
    data: np.ndarray
    grid: GridSpec
    params: ImagingParams | None = None
    dynamic_range_db: float = DEFAULT_DYNAMIC_RANGE_DB


def sample_imaging_params(seed: int) -> ImagingParams:
    """Draw acquisition parameters uniformly from their ranges."""
    rng = substream(seed, _PARAMS_STREAM)
    return ImagingParams(
        f_c=rng.uniform(*FC_RANGE),
        f_s=rng.uniform(*FS_RANGE),
        v=rng.uniform(*V_RANGE),
        sigma_a=rng.uniform(*SIGMA_A_RANGE),
        sigma_l=rng.uniform(*SIGMA_L_RANGE),
        f_number=rng.uniform(*F_NUMBER_RANGE),
        n_pulses=int(rng.choice(N_PULSES_CHOICES)),
        noise_std=rng.uniform(*NOISE_STD_RANGE),
    )


def grid_for_params(
    params: ImagingParams, n_axial: int, n_lateral: int, d_lateral: float = 0.1
) -> GridSpec:
    """Grid whose axial pitch matches RF sampling at f_s."""
    return GridSpec(
        n_axial=n_axial,
        n_lateral=n_lateral,
        d_axial=params.d_axial,
        d_lateral=d_lateral,
    )


def build_psf(params: ImagingParams, grid: GridSpec, carrier_phase: float = 0.0) -> Psf:
    """Sample the Gaussian-cosine PSF on the grid pitches.

    kernel(a, l) = exp(-0.5 (a^2/sigma_a^2 + l^2/sigma_l^2)) * cos(2 pi a / P)
    with P the pulse-echo carrier period v/(2 f_c). Truncated at
    ``n_pulses`` carrier periods axially and 4 sigma_l laterally.
    ``carrier_phase`` shifts the cosine; the default keeps the kernel even
    with value 1 at the center.
    """
    period = params.carrier_period
    if grid.d_axial > period / 2.0 + 1e-12:
        raise ConfigurationError(
            f"axial pitch {grid.d_axial:.5f} mm undersamples the carrier "
            f"(period {period:.5f} mm); need d_axial <= v/(4 f_c)"
        )
    half_a = params.n_pulses * period
    half_l = 4.0 * params.sigma_l
    n_half_a = int(math.ceil(half_a / grid.d_axial))
    n_half_l = int(math.ceil(half_l / grid.d_lateral))
    a = np.arange(-n_half_a, n_half_a + 1) * grid.d_axial
    l = np.arange(-n_half_l, n_half_l + 1) * grid.d_lateral
    axial = np.exp(-0.5 * (a / params.sigma_a) ** 2) * np.cos(
        2.0 * math.pi * a / period + carrier_phase
    )
    lateral = np.exp(-0.5 * (l / params.sigma_l) ** 2)
    kernel = np.outer(axial, lateral)
    return Psf(
        kernel=kernel,
        d_axial=grid.d_axial,
        d_lateral=grid.d_lateral,
        support=n_half_a * grid.d_axial,
    )


def convolve_same(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Zero-padded same-size 2D convolution via the frequency domain."""
    return fftconvolve(image, kernel, mode="same")


def simulate_rf(smap: ScattererMap, psf: Psf, params: ImagingParams, seed: int) -> RfFrame:
    """Convolve the scatterer map with the PSF and add scaled white noise.

    Noise is i.i.d. Normal with standard deviation ``noise_std`` times the
    RMS of the noise-free RF. Deterministic given the seed.
    """
    grid = smap.grid
    if not (
        math.isclose(grid.d_axial, psf.d_axial, rel_tol=1e-9)
        and math.isclose(grid.d_lateral, psf.d_lateral, rel_tol=1e-9)
    ):
        raise ConfigurationError("scatterer map and PSF pixel pitches do not match")
    rf = convolve_same(smap.g, psf.kernel)
    if params.noise_std > 0:
        rms = float(np.sqrt(np.mean(rf**2)))
        if rms > 0:
            rng = substream(seed, _NOISE_STREAM)
            rf = rf + rng.normal(0.0, params.noise_std * rms, size=rf.shape)
    return RfFrame(data=rf, grid=grid, params=params)


def detect_envelope(rf: RfFrame) -> EnvelopeFrame:
    """Envelope as the magnitude of the per-column analytic signal."""
    if rf.data.shape[0] < 16:
        raise ConfigurationError("envelope detection needs at least 16 axial samples")
    env = np.abs(hilbert(rf.data, axis=0))
    return EnvelopeFrame(data=env, grid=rf.grid, params=rf.params)


def log_compress(
    env: EnvelopeFrame, dynamic_range_db: float = DEFAULT_DYNAMIC_RANGE_DB
) -> BmodeFrame:
    """20 log10(A / max A), clamped to [-dynamic_range_db, 0]."""
    if dynamic_range_db <= 0:
        raise ConfigurationError("dynamic range must be positive")
    peak = float(env.data.max())
    if peak <= 0:
        raise DegenerateDataError("envelope is identically zero; cannot log-compress")
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(env.data / peak)
    db = np.clip(db, -dynamic_range_db, 0.0)
    return BmodeFrame(
        data=db, grid=env.grid, params=env.params, dynamic_range_db=dynamic_range_db
    )


def resolution_cell_extent(params: ImagingParams) -> tuple[float, float]:
    """-6 dB full widths (axial, lateral) of the PSF Gaussian envelope, mm."""
    return (
        HALF_POWER_WIDTH_FACTOR * params.sigma_a,
        HALF_POWER_WIDTH_FACTOR * params.sigma_l,
    )


def simulate_homogeneous(
    seed: int,
    density: float,
    params: ImagingParams,
    grid: GridSpec,
    mu_s: float = 1.0,
    sigma_s: float = 0.03,
):
    """Uniform-density phantom pipeline: map, RF and envelope frames."""
    from .phantom import RegionAssignment, RegionMasks, sample_scatterer_map

    zeros = np.zeros(grid.shape, dtype=np.uint8)
    masks = RegionMasks(sc=zeros, ms=zeros)
    assign = RegionAssignment(
        density_per_cell=(density, density), mu_s=(mu_s, mu_s), sigma_s=sigma_s
    )
    smap = sample_scatterer_map(masks, assign, params.sigma_a, params.sigma_l, grid, seed)
    psf = build_psf(params, grid)
    rf = simulate_rf(smap, psf, params, seed)
    env = detect_envelope(rf)
    return smap, rf, env
