"""Random region masks and scatterer echogenicity grids.

A phantom is described by two independent binary masks (scatterer number
density regions and mean scatterer amplitude regions) plus a region
assignment that maps mask values to per-resolution-cell densities and mean
amplitudes. ``sample_scatterer_map`` turns that description into a grid of
echogenicity values: per pixel a Bernoulli presence draw times a Gaussian
amplitude draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, DensityError
from .grid import GridSpec, substream

# substream path tags, fixed so parallel generation stays order-independent
_SC_STREAM = 0
_MS_STREAM = 1
_SCATTER_STREAM = 2

#: -6 dB full width of a Gaussian amplitude profile is 2*sigma*sqrt(2 ln 2)
HALF_POWER_WIDTH_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))

# Scatterer-property ranges used when sampling phantoms
UDS_DENSITY_RANGE = (1.0, 2.0)  # scatterers per resolution cell
FDS_DENSITY_RANGE = (11.0, 16.0)
MU_S_RANGE = (0.3, 1.3)  # mean scatterer amplitude
SIGMA_S_FIXED = 0.03  # amplitude standard deviation


@dataclass(frozen=True)
class ShapeConfig:
    """Controls the random blob generator for region masks.

    Masks are made by thresholding a Gaussian-smoothed white-noise field at
    a random quantile and keeping a random number of the largest connected
    components. Masks whose regions would fall below ``min_area_fraction``
    of the grid are rejected and redrawn.
    """

    blob_count_range: tuple[int, int] = (1, 4)
    min_area_fraction: float = 0.01
    smooth_sigma_range: tuple[float, float] = (0.04, 0.14)
    threshold_quantile_range: tuple[float, float] = (0.55, 0.90)
    max_attempts: int = 50

    def __post_init__(self):
        lo, hi = self.blob_count_range
        if lo < 0 or hi < lo:
            raise ConfigurationError("invalid blob_count_range")
        if not 0.0 <= self.min_area_fraction <= 1.0:
            raise ConfigurationError("min_area_fraction must be in [0, 1]")


@dataclass(frozen=True)
class RegionMasks:
    """Binary masks for density (sc) and mean amplitude (ms) regions."""

    sc: np.ndarray
    ms: np.ndarray

    def __post_init__(self):
        if self.sc.shape != self.ms.shape:
            raise ConfigurationError("sc and ms masks must have identical shape")
        for name, mask in (("sc", self.sc), ("ms", self.ms)):
            if not np.isin(mask, (0, 1)).all():
                raise ConfigurationError(f"{name} mask must contain only 0 and 1")


@dataclass(frozen=True)
class RegionAssignment:
    """Scatterer properties for each mask value.

    ``density_per_cell[k]`` is the expected number of scatterers per
    resolution cell where the sc mask equals k; ``mu_s[k]`` is the mean
    scatterer amplitude where the ms mask equals k.
    """

    density_per_cell: tuple[float, float]
    mu_s: tuple[float, float]
    sigma_s: float = 0.03

    def __post_init__(self):
        if any(d < 0 for d in self.density_per_cell):
            raise ConfigurationError("densities must be non-negative")
        if self.sigma_s < 0:
            raise ConfigurationError("sigma_s must be non-negative")

    def to_dict(self) -> dict:
        return {
            "density_per_cell": list(self.density_per_cell),
            "mu_s": list(self.mu_s),
            "sigma_s": self.sigma_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionAssignment":
        return cls(
            density_per_cell=tuple(d["density_per_cell"]),
            mu_s=tuple(d["mu_s"]),
            sigma_s=float(d["sigma_s"]),
        )


@dataclass(frozen=True)
class ScattererMap:
    """Echogenicity grid with the provenance needed to regenerate it."""

    g: np.ndarray
    grid: GridSpec
    seed: int
    assignment: RegionAssignment


def _single_mask(rng: np.random.Generator, grid: GridSpec, cfg: ShapeConfig) -> np.ndarray:
    n_total = grid.n_axial * grid.n_lateral
    min_area = max(1, int(math.ceil(cfg.min_area_fraction * n_total)))
    lo, hi = cfg.blob_count_range
    if min_area * max(hi, 1) > n_total:
        raise ConfigurationError(
            "grid too small to host the requested number of minimum-area regions"
        )
    n_blobs = int(rng.integers(lo, hi + 1))
    if n_blobs == 0:
        return np.zeros(grid.shape, dtype=np.uint8)

    for _ in range(cfg.max_attempts):
        sigma = rng.uniform(*cfg.smooth_sigma_range) * min(grid.n_axial, grid.n_lateral)
        field_ = ndimage.gaussian_filter(rng.standard_normal(grid.shape), sigma)
        q = rng.uniform(*cfg.threshold_quantile_range)
        binary = field_ > np.quantile(field_, q)
        labels, n_found = ndimage.label(binary)
        if n_found < n_blobs:
            continue
        areas = ndimage.sum_labels(binary, labels, index=np.arange(1, n_found + 1))
        order = np.argsort(areas)[::-1][:n_blobs]
        if areas[order[-1]] < min_area:
            continue
        keep = np.isin(labels, order + 1)
        return keep.astype(np.uint8)
    raise ConfigurationError(
        f"could not draw a mask satisfying the area rule in {cfg.max_attempts} attempts"
    )


def generate_region_masks(seed: int, grid: GridSpec, cfg: ShapeConfig | None = None) -> RegionMasks:
    """Draw independent sc and ms binary masks, deterministic in ``seed``."""
    cfg = cfg or ShapeConfig()
    sc = _single_mask(substream(seed, _SC_STREAM), grid, cfg)
    ms = _single_mask(substream(seed, _MS_STREAM), grid, cfg)
    return RegionMasks(sc=sc, ms=ms)


def resolution_cell_area_mm2(psf_sigma_a: float, psf_sigma_l: float) -> float:
    """Elliptical -6 dB resolution-cell area, pi * (w_a/2) * (w_l/2)."""
    if psf_sigma_a <= 0 or psf_sigma_l <= 0:
        raise ConfigurationError("PSF widths must be positive")
    w_a = HALF_POWER_WIDTH_FACTOR * psf_sigma_a
    w_l = HALF_POWER_WIDTH_FACTOR * psf_sigma_l
    return math.pi * (w_a / 2.0) * (w_l / 2.0)


def resolution_cell_pixels(psf_sigma_a: float, psf_sigma_l: float, grid: GridSpec) -> float:
    """Resolution-cell area expressed in grid pixels."""
    return resolution_cell_area_mm2(psf_sigma_a, psf_sigma_l) / (grid.d_axial * grid.d_lateral)


def density_to_bernoulli_p(
    density: float, psf_sigma_a: float, psf_sigma_l: float, grid: GridSpec
) -> float:
    """Per-pixel scatterer presence probability for a target density.

    ``density`` is scatterers per -6 dB resolution cell; the probability is
    density divided by the cell area in pixels. Raises ``DensityError`` when
    the grid is too coarse to represent the density (p would exceed 1).
    """
    if density < 0:
        raise ConfigurationError("density must be non-negative")
    n_cell = resolution_cell_pixels(psf_sigma_a, psf_sigma_l, grid)
    p = density / n_cell
    if p > 1.0:
        raise DensityError(
            f"density {density} per cell needs p={p:.3f} > 1 at this pixel pitch"
        )
    return p


def sample_scatterer_map(
    masks: RegionMasks,
    assign: RegionAssignment,
    psf_sigma_a: float,
    psf_sigma_l: float,
    grid: GridSpec,
    seed: int,
) -> ScattererMap:
    """Sample the echogenicity grid g = K * A.

    K is Bernoulli with probability set by the local sc label's density;
    A is Normal(mu_s, sigma_s^2) with mu_s set by the local ms label.
    Deterministic given the seed.
    """
    if masks.sc.shape != grid.shape:
        raise ConfigurationError("mask shape does not match grid")
    p = np.array(
        [
            density_to_bernoulli_p(d, psf_sigma_a, psf_sigma_l, grid)
            for d in assign.density_per_cell
        ]
    )
    mu = np.asarray(assign.mu_s, dtype=float)
    p_grid = p[masks.sc.astype(np.intp)]
    mu_grid = mu[masks.ms.astype(np.intp)]

    rng = substream(seed, _SCATTER_STREAM)
    presence = rng.random(grid.shape) < p_grid
    amplitude = rng.normal(loc=mu_grid, scale=assign.sigma_s)
    g = np.where(presence, amplitude, 0.0)
    return ScattererMap(g=g, grid=grid, seed=int(seed), assignment=assign)
