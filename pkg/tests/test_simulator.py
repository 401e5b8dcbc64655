"""PSF construction, RF synthesis, envelope detection, log compression."""

import math

import numpy as np
import pytest

from qusgrid import (
    ConfigurationError,
    DegenerateDataError,
    EnvelopeFrame,
    GridSpec,
    ImagingParams,
    WindowSpec,
    build_psf,
    detect_envelope,
    grid_for_params,
    log_compress,
    parametric_image,
    resolution_cell_extent,
    sample_imaging_params,
    simulate_homogeneous,
    simulate_rf,
)
from qusgrid.phantom import (
    RegionAssignment,
    RegionMasks,
    ScattererMap,
    sample_scatterer_map,
)
from qusgrid.simulator import (
    FC_RANGE,
    FS_RANGE,
    F_NUMBER_RANGE,
    N_PULSES_CHOICES,
    NOISE_STD_RANGE,
    SIGMA_A_RANGE,
    SIGMA_L_RANGE,
    V_RANGE,
    convolve_same,
)
from tests.conftest import FAST_PARAMS


class TestSampleImagingParams:
    def test_ranges_over_many_draws(self):
        draws = [sample_imaging_params(seed) for seed in range(10_000)]
        for p in draws:
            assert FC_RANGE[0] <= p.f_c <= FC_RANGE[1]
            assert FS_RANGE[0] <= p.f_s <= FS_RANGE[1]
            assert V_RANGE[0] <= p.v <= V_RANGE[1]
            assert SIGMA_A_RANGE[0] <= p.sigma_a <= SIGMA_A_RANGE[1]
            assert SIGMA_L_RANGE[0] <= p.sigma_l <= SIGMA_L_RANGE[1]
            assert F_NUMBER_RANGE[0] <= p.f_number <= F_NUMBER_RANGE[1]
            assert p.n_pulses in N_PULSES_CHOICES
            assert NOISE_STD_RANGE[0] <= p.noise_std <= NOISE_STD_RANGE[1]
        # uniform-mean oracle: E[f_c] = 5.5, SE = (3/sqrt(12))/100
        mean_fc = np.mean([p.f_c for p in draws])
        assert abs(mean_fc - 5.5) < 3 * (3.0 / math.sqrt(12)) / 100.0

    def test_deterministic(self):
        assert sample_imaging_params(123) == sample_imaging_params(123)

    def test_positivity_enforced(self):
        with pytest.raises(ConfigurationError):
            ImagingParams(f_c=-5.0, f_s=60.0, v=1540.0, sigma_a=0.2, sigma_l=0.3)


class TestBuildPsf:
    def test_center_is_one(self):
        grid = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.2)
        psf = build_psf(FAST_PARAMS, grid)
        c_a, c_l = psf.kernel.shape[0] // 2, psf.kernel.shape[1] // 2
        assert psf.kernel[c_a, c_l] == 1.0

    def test_even_symmetry(self):
        grid = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.2)
        k = build_psf(FAST_PARAMS, grid).kernel
        np.testing.assert_array_equal(k, k[::-1, :])
        np.testing.assert_array_equal(k, k[:, ::-1])

    def test_matches_scalar_formula(self):
        # independent pointwise evaluation with math.exp / math.cos
        grid = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.2)
        psf = build_psf(FAST_PARAMS, grid)
        c_a, c_l = psf.kernel.shape[0] // 2, psf.kernel.shape[1] // 2
        period = FAST_PARAMS.v / (2000.0 * FAST_PARAMS.f_c)
        for ia in (-11, -3, 0, 5, 17):
            for il in (-4, 0, 3):
                a = ia * grid.d_axial
                l = il * grid.d_lateral
                want = math.exp(
                    -0.5 * (a**2 / FAST_PARAMS.sigma_a**2 + l**2 / FAST_PARAMS.sigma_l**2)
                ) * math.cos(2 * math.pi * a / period)
                assert psf.kernel[c_a + ia, c_l + il] == pytest.approx(want, abs=1e-15)

    def test_first_axial_zero_crossing_at_quarter_period(self):
        grid = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.2)
        psf = build_psf(FAST_PARAMS, grid)
        c_a, c_l = psf.kernel.shape[0] // 2, psf.kernel.shape[1] // 2
        column = psf.kernel[c_a:, c_l]
        k = int(np.flatnonzero(column < 0)[0])
        crossing = (k - 1 + column[k - 1] / (column[k - 1] - column[k])) * grid.d_axial
        quarter = FAST_PARAMS.carrier_period / 4.0
        assert crossing == pytest.approx(quarter, abs=grid.d_axial / 4)

    def test_truncation_extents(self):
        grid = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.2)
        psf = build_psf(FAST_PARAMS, grid)
        half_a = FAST_PARAMS.n_pulses * FAST_PARAMS.carrier_period
        assert psf.support >= half_a
        assert (psf.kernel.shape[0] - 1) // 2 == math.ceil(half_a / grid.d_axial)
        assert (psf.kernel.shape[1] - 1) // 2 == math.ceil(4 * FAST_PARAMS.sigma_l / grid.d_lateral)

    def test_undersampled_carrier_rejected(self):
        grid = GridSpec(256, 96, d_axial=0.09, d_lateral=0.2)  # > v/(4 f_c) = 0.077
        with pytest.raises(ConfigurationError):
            build_psf(FAST_PARAMS, grid)


def _map_with(grid, g):
    assign = RegionAssignment(density_per_cell=(0.0, 0.0), mu_s=(1.0, 1.0))
    return ScattererMap(g=g, grid=grid, seed=0, assignment=assign)


def _impulse_map(grid):
    g = np.zeros(grid.shape)
    g[grid.n_axial // 2, grid.n_lateral // 2] = 1.0
    return _map_with(grid, g)


class TestSimulateRf:
    def test_impulse_reproduces_psf(self):
        grid = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.2)
        psf = build_psf(FAST_PARAMS, grid)
        smap = _impulse_map(grid)
        rf = simulate_rf(smap, psf, FAST_PARAMS, seed=0)
        c_a, c_l = grid.n_axial // 2, grid.n_lateral // 2
        h_a, h_l = psf.kernel.shape[0] // 2, psf.kernel.shape[1] // 2
        block = rf.data[c_a - h_a : c_a + h_a + 1, c_l - h_l : c_l + h_l + 1]
        np.testing.assert_allclose(block, psf.kernel, atol=1e-12)
        outside = rf.data.copy()
        outside[c_a - h_a : c_a + h_a + 1, c_l - h_l : c_l + h_l + 1] = 0.0
        assert np.abs(outside).max() < 1e-12

    def test_zero_map_zero_noise(self):
        grid = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.2)
        psf = build_psf(FAST_PARAMS, grid)
        smap = _map_with(grid, np.zeros(grid.shape))
        rf = simulate_rf(smap, psf, FAST_PARAMS, seed=0)
        assert np.abs(rf.data).max() < 1e-15

    def test_linearity_without_noise(self):
        grid = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.2)
        psf = build_psf(FAST_PARAMS, grid)
        smap, _, _ = _sim_pieces(grid)
        rf1 = simulate_rf(smap, psf, FAST_PARAMS, seed=0).data
        rf2 = simulate_rf(_map_with(grid, 2.5 * smap.g), psf, FAST_PARAMS, seed=0).data
        np.testing.assert_allclose(rf2, 2.5 * rf1, rtol=1e-12, atol=1e-12)

    def test_noise_deterministic_and_scaled(self):
        noisy = ImagingParams(
            f_c=5.0, f_s=60.0, v=1540.0, sigma_a=0.2, sigma_l=0.3, noise_std=0.04
        )
        grid = grid_for_params(noisy, 256, 96, d_lateral=0.2)
        psf = build_psf(noisy, grid)
        smap, _, _ = _sim_pieces(grid)
        a = simulate_rf(smap, psf, noisy, seed=5).data
        b = simulate_rf(smap, psf, noisy, seed=5).data
        np.testing.assert_array_equal(a, b)
        clean = simulate_rf(smap, psf, FAST_PARAMS, seed=5).data
        noise = a - clean
        rms = np.sqrt(np.mean(clean**2))
        assert np.std(noise) == pytest.approx(0.04 * rms, rel=0.05)

    def test_pitch_mismatch_rejected(self):
        grid = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.2)
        other = grid_for_params(FAST_PARAMS, 256, 96, d_lateral=0.1)
        psf = build_psf(FAST_PARAMS, other)
        smap, _, _ = _sim_pieces(grid)
        with pytest.raises(ConfigurationError):
            simulate_rf(smap, psf, FAST_PARAMS, seed=0)

    def test_fft_matches_direct_loops_once(self):
        rng = np.random.default_rng(0)
        img = rng.standard_normal((32, 32))
        ker = rng.standard_normal((5, 3))
        got = convolve_same(img, ker)
        want = _direct_conv_same(img, ker)
        rel = np.abs(got - want).max() / np.abs(want).max()
        assert rel <= 1e-6


def _direct_conv_same(img, ker):
    # quadruple-loop spatial convolution, zero padded, 'same' alignment
    n, m = img.shape
    kh, kw = ker.shape
    oh, ow = kh // 2, kw // 2
    out = np.zeros_like(img)
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for u in range(kh):
                for v in range(kw):
                    ii = i - (u - oh)
                    jj = j - (v - ow)
                    if 0 <= ii < n and 0 <= jj < m:
                        acc += ker[u, v] * img[ii, jj]
            out[i, j] = acc
    return out


def _sim_pieces(grid):
    masks = RegionMasks(
        sc=np.zeros(grid.shape, dtype=np.uint8), ms=np.zeros(grid.shape, dtype=np.uint8)
    )
    assign = RegionAssignment(density_per_cell=(12.0, 12.0), mu_s=(1.0, 1.0))
    smap = sample_scatterer_map(masks, assign, 0.2, 0.3, grid, seed=7)
    return smap, masks, assign


class TestEnvelope:
    def test_pure_tone_has_unit_envelope(self):
        grid = GridSpec(512, 64, 0.01, 0.1)
        a = np.arange(512)
        tone = np.cos(2 * np.pi * a / 16.0)
        rf_data = np.tile(tone[:, None], (1, 64))
        from qusgrid.simulator import RfFrame

        env = detect_envelope(RfFrame(data=rf_data, grid=grid, params=None))
        interior = env.data[48:-48, :]
        assert np.abs(interior - 1.0).max() < 0.01

    def test_envelope_nonnegative_and_dominates_rf(self, fds_envelope, fast_params):
        grid = grid_for_params(fast_params, 512, 192, d_lateral=0.2)
        _, rf, env = simulate_homogeneous(42, 12.0, fast_params, grid)
        assert np.all(env.data >= 0)
        assert np.all(env.data >= np.abs(rf.data) - 1e-9)

    def test_too_few_axial_samples(self):
        from qusgrid.simulator import RfFrame

        grid = GridSpec(64, 64, 0.01, 0.1)
        frame = RfFrame(data=np.zeros((8, 64)), grid=grid, params=None)
        with pytest.raises(ConfigurationError):
            detect_envelope(frame)

    def test_envelope_invariant_to_carrier_phase(self, fast_params):
        grid = grid_for_params(fast_params, 512, 96, d_lateral=0.2)
        smap, _, _ = _sim_pieces(grid)
        psf0 = build_psf(fast_params, grid)
        psf1 = build_psf(fast_params, grid, carrier_phase=np.pi / 3)
        env0 = detect_envelope(simulate_rf(smap, psf0, fast_params, seed=0)).data
        env1 = detect_envelope(simulate_rf(smap, psf1, fast_params, seed=0)).data
        sl = (slice(64, -64), slice(8, -8))
        rel = np.abs(env0[sl] - env1[sl]).mean() / env0[sl].mean()
        assert rel < 0.01


class TestLogCompress:
    def _env(self, data):
        grid = GridSpec(64, 64, 0.01, 0.1)
        return EnvelopeFrame(data=np.asarray(data, dtype=float), grid=grid, params=None)

    def test_reference_points(self):
        data = np.full((64, 64), 1e-4)
        data[0, 0] = 1.0
        data[0, 1] = 0.1
        bm = log_compress(self._env(data), dynamic_range_db=50.0)
        assert bm.data[0, 0] == 0.0
        assert bm.data[0, 1] == pytest.approx(-20.0, abs=1e-12)
        assert bm.data[1, 1] == -50.0  # 1e-4 of max, clamped at the dynamic range

    def test_bounds(self, fds_envelope):
        bm = log_compress(fds_envelope, dynamic_range_db=40.0)
        assert bm.data.max() == 0.0
        assert bm.data.min() >= -40.0

    def test_zero_envelope_rejected(self):
        with pytest.raises(DegenerateDataError):
            log_compress(self._env(np.zeros((64, 64))))


class TestResolutionCell:
    def test_known_values(self):
        p = ImagingParams(f_c=5.0, f_s=60.0, v=1540.0, sigma_a=0.2, sigma_l=0.3)
        w_a, w_l = resolution_cell_extent(p)
        assert w_a == pytest.approx(0.4710, abs=5e-4)
        assert w_l == pytest.approx(0.7065, abs=5e-4)

    def test_linearity_in_sigma(self):
        p1 = ImagingParams(f_c=5.0, f_s=60.0, v=1540.0, sigma_a=0.1, sigma_l=0.2)
        p2 = ImagingParams(f_c=5.0, f_s=60.0, v=1540.0, sigma_a=0.2, sigma_l=0.4)
        w1 = resolution_cell_extent(p1)
        w2 = resolution_cell_extent(p2)
        assert w2[0] == pytest.approx(2 * w1[0], rel=1e-12)
        assert w2[1] == pytest.approx(2 * w1[1], rel=1e-12)


def test_rayleigh_limit_invariant(fds_envelope):
    # fully developed speckle: window SNR close to the Rayleigh value 1.91
    w = WindowSpec(64, 64, 32, 32, min_cell_multiple=0)
    snr = parametric_image(fds_envelope, w, "snr").values
    central = snr[2:-2, 1:-1]
    assert abs(np.nanmean(central) - 1.91) < 0.08
