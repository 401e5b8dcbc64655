"""Grid geometry shared by phantom generation and simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

MIN_GRID_SIZE = 64


@dataclass(frozen=True)
class GridSpec:
    """Regular 2D sample grid with physical pixel pitch.

    Axis 0 is axial (depth), axis 1 is lateral. Pitches are in mm.
    """

    n_axial: int
    n_lateral: int
    d_axial: float
    d_lateral: float

    def __post_init__(self):
        if self.n_axial < MIN_GRID_SIZE or self.n_lateral < MIN_GRID_SIZE:
            raise ConfigurationError(
                f"grid must be at least {MIN_GRID_SIZE}x{MIN_GRID_SIZE}, "
                f"got {self.n_axial}x{self.n_lateral}"
            )
        if self.d_axial <= 0 or self.d_lateral <= 0:
            raise ConfigurationError("grid pitches must be positive")

    @property
    def shape(self):
        return (self.n_axial, self.n_lateral)

    @property
    def extent_axial(self) -> float:
        return self.n_axial * self.d_axial

    @property
    def extent_lateral(self) -> float:
        return self.n_lateral * self.d_lateral

    def to_dict(self) -> dict:
        return {
            "n_axial": self.n_axial,
            "n_lateral": self.n_lateral,
            "d_axial": self.d_axial,
            "d_lateral": self.d_lateral,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            n_axial=int(d["n_axial"]),
            n_lateral=int(d["n_lateral"]),
            d_axial=float(d["d_axial"]),
            d_lateral=float(d["d_lateral"]),
        )


def substream(seed: int, *path: int) -> np.random.Generator:
    """Deterministic RNG derived from a master seed and an integer path.

    Streams with different paths are statistically independent, so samples
    can be generated in any order (or in parallel) without changing bytes.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))
