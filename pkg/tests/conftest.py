import numpy as np
import pytest

from qusgrid import (
    GridSpec,
    ImagingParams,
    WindowSpec,
    grid_for_params,
    simulate_homogeneous,
)

# acquisition used by most statistics tests: modest grid, no noise
FAST_PARAMS = ImagingParams(
    f_c=5.0, f_s=60.0, v=1540.0, sigma_a=0.2, sigma_l=0.3, noise_std=0.0
)


@pytest.fixture(scope="session")
def fast_params():
    return FAST_PARAMS


@pytest.fixture(scope="session")
def fds_envelope():
    """One fully developed speckle frame, 512x192, density 12."""
    grid = grid_for_params(FAST_PARAMS, 512, 192, d_lateral=0.2)
    _, _, env = simulate_homogeneous(42, 12.0, FAST_PARAMS, grid)
    return env


@pytest.fixture(scope="session")
def uds_envelope():
    """Under-developed speckle frame, density 1.5, same geometry."""
    grid = grid_for_params(FAST_PARAMS, 512, 192, d_lateral=0.2)
    _, _, env = simulate_homogeneous(43, 1.5, FAST_PARAMS, grid)
    return env


def tile_to_min(values, min_samples=64):
    """Repeat a tiny example patch; population moments are unchanged."""
    values = np.asarray(values, dtype=float)
    reps = int(np.ceil(min_samples / values.size))
    return np.tile(values, reps)
