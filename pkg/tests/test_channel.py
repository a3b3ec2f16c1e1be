import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csilab.channel import (ChannelGrid, ChannelModelConfig, PathSet, derive_seed, evaluate_channel_grid,
                            exponential_correlation, generate_frame, generate_frames, sample_path_set,
                            stack_frames, subcarrier_frequencies)

NLOS = float("-inf")
SMALL = ChannelModelConfig(n_sc=8, n_s=4, n_r=2, n_t=2)


class TestConfig:
    def test_defaults(self):
        c = ChannelModelConfig()
        assert (c.carrier_freq, c.bandwidth, c.n_r, c.n_t) == (5.3e9, 20e6, 3, 3)
        assert (c.n_paths, c.rms_delay_spread, c.max_doppler, c.rician_k_db) == (12, 50e-9, 10.0, 6.0)
        assert c.subcarrier_spacing == 312.5e3 and c.slot_duration == 4e-6
        assert c.is_los and not c.with_(rician_k_db=NLOS).is_los

    @pytest.mark.parametrize("change", [
        dict(n_sc=0), dict(n_paths=0), dict(n_r=-1), dict(rms_delay_spread=0.0), dict(rx_corr=1.0),
        dict(tx_corr=-0.1), dict(max_doppler=-1.0), dict(rician_k_db=math.inf), dict(rician_k_db=math.nan),
        dict(bandwidth=0.0),
    ])
    def test_invalid_rejected(self, change):
        with pytest.raises(ValueError, match="invalid ChannelModelConfig"):
            ChannelModelConfig(**change)

    def test_diagnostic_names_every_problem(self):
        with pytest.raises(ValueError) as err:
            ChannelModelConfig(n_sc=0, rx_corr=2.0)
        assert "n_sc" in str(err.value) and "rx_corr" in str(err.value)


class TestPathSet:
    def test_single_nlos_path_has_unit_power(self):
        paths = sample_path_set(SMALL.with_(n_paths=1, rician_k_db=NLOS), seed=3)
        assert paths.powers.shape == (1,)
        assert paths.powers[0] == pytest.approx(1.0, abs=1e-12)
        assert paths.los_signature is None

    def test_k_zero_db_splits_power_evenly(self):
        paths = sample_path_set(SMALL.with_(rician_k_db=0.0), seed=3)
        assert paths.los_power == pytest.approx(0.5)
        assert np.sum(paths.powers) == pytest.approx(0.5)

    def test_exponential_correlation_row(self):
        np.testing.assert_allclose(exponential_correlation(3, 0.3)[0], [1.0, 0.3, 0.09])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**63 - 1), n_paths=st.integers(1, 20),
           k_db=st.one_of(st.just(NLOS), st.floats(-10, 20)), doppler=st.floats(0, 500))
    def test_normalization_and_doppler_bound(self, seed, n_paths, k_db, doppler):
        cfg = SMALL.with_(n_paths=n_paths, rician_k_db=k_db, max_doppler=doppler)
        paths = sample_path_set(cfg, seed)
        assert abs(paths.total_power - 1.0) < 1e-9
        assert np.all(np.abs(paths.dopplers) <= doppler)
        assert np.all(paths.delays >= 0) and np.all(paths.delays <= 5 * cfg.rms_delay_spread)
        # powers decay with delay
        assert np.all(np.diff(paths.powers) <= 1e-15)

    def test_unnormalized_paths_rejected(self):
        paths = sample_path_set(SMALL, 0)
        paths.powers = paths.powers * 2
        with pytest.raises(ValueError, match="sum to 1"):
            evaluate_channel_grid(paths, SMALL)


def _manual_paths(delays, powers, n_r=1, n_t=1):
    n = len(delays)
    return PathSet(delays=np.asarray(delays, float), powers=np.asarray(powers, float), dopplers=np.zeros(n),
                   signatures=np.ones((n, n_r, n_t), dtype=complex))


class TestEvaluate:
    def test_static_single_path_is_flat(self):
        cfg = SMALL.with_(n_paths=1)
        a = np.array([[1 + 2j, -0.5j], [0.25, 3.0]])
        paths = PathSet(np.zeros(1), np.ones(1), np.zeros(1), a[None])
        h = evaluate_channel_grid(paths, cfg).values
        assert h.shape == (8, 4, 2, 2) and h.dtype == np.complex64
        assert np.array_equal(h, np.broadcast_to(a.astype(np.complex64), h.shape))

    def test_two_path_ripple_period(self):
        # equal paths at 0 and dtau give |H(f)| periodic in 1/dtau = 8 subcarriers
        cfg = ChannelModelConfig(n_sc=32, n_s=1, n_r=1, n_t=1)
        dtau = 1.0 / (8 * cfg.subcarrier_spacing)
        mag = np.abs(evaluate_channel_grid(_manual_paths([0.0, dtau], [0.5, 0.5]), cfg).values[:, 0, 0, 0])
        np.testing.assert_allclose(mag[8:], mag[:-8], atol=1e-6)
        assert mag.max() - mag.min() > 1.0
        f = subcarrier_frequencies(cfg)
        expected = np.abs(np.sqrt(0.5) * (1 + np.exp(-2j * np.pi * f * dtau)))
        np.testing.assert_allclose(mag, expected, atol=1e-6)

    def test_subcarrier_indexing_centered(self):
        f = subcarrier_frequencies(SMALL)
        assert f[SMALL.n_sc // 2] == 0.0 and f[0] == -4 * SMALL.subcarrier_spacing

    def test_doppler_rotates_over_slots(self):
        cfg = ChannelModelConfig(n_sc=1, n_s=5, n_r=1, n_t=1, slot_duration=1e-3)
        paths = PathSet(np.zeros(1), np.ones(1), np.array([50.0]), np.ones((1, 1, 1), complex))
        h = evaluate_channel_grid(paths, cfg).values[0, :, 0, 0]
        np.testing.assert_allclose(h, np.exp(2j * np.pi * 50.0 * np.arange(5) * 1e-3), atol=1e-6)


class TestFrames:
    def test_determinism(self):
        a = generate_frames(SMALL, 3, base_seed=9)
        b = generate_frames(SMALL, 3, base_seed=9)
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
        assert [f.frame_id for f in a] == [0, 1, 2]

    def test_single_frame_is_composition(self):
        (frame,) = generate_frames(SMALL, 1, base_seed=4)
        direct = evaluate_channel_grid(sample_path_set(SMALL, derive_seed(4, 0)), SMALL, 0)
        assert np.array_equal(frame.values, direct.values)

    def test_frames_differ(self):
        a, b = generate_frames(SMALL, 2, base_seed=4)
        assert not np.array_equal(a.values, b.values)

    def test_order_independent(self):
        frames = generate_frames(SMALL, 4, base_seed=6)
        assert np.array_equal(generate_frame(SMALL, 3, 6).values, frames[3].values)

    def test_default_dims(self):
        (frame,) = generate_frames(ChannelModelConfig(), 1)
        assert frame.dims == (64, 64, 3, 3)
        assert np.all(np.isfinite(frame.values))

    def test_count_validated(self):
        with pytest.raises(ValueError):
            generate_frames(SMALL, 0)

    def test_grid_must_be_4d(self):
        with pytest.raises(ValueError):
            ChannelGrid(0, np.zeros((2, 2)))

    def test_stack(self):
        frames = generate_frames(SMALL, 3, base_seed=1)
        assert stack_frames(frames).shape == (3,) + SMALL.dims

    def test_derive_seed_distinct(self):
        seeds = {derive_seed(1, j) for j in range(100)} | {derive_seed(2, 0)}
        assert len(seeds) == 101
        assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2) != derive_seed(5, 2, 1)


class TestStatistics:
    # moderate Monte Carlo sizes; the 10^4-frame versions live in the acceptance suite
    def test_nlos_zero_mean(self):
        h = stack_frames(generate_frames(SMALL.with_(rician_k_db=NLOS), 2000, base_seed=31))
        assert np.max(np.abs(h.mean(axis=0))) < 0.06

    def test_los_mean_is_deterministic_component(self):
        cfg = SMALL.with_(rician_k_db=6.0)
        h = stack_frames(generate_frames(cfg, 2000, base_seed=32))
        k = 10 ** 0.6
        np.testing.assert_allclose(h.mean(axis=0), math.sqrt(k / (k + 1)), atol=0.04)

    def test_unit_power(self):
        h = stack_frames(generate_frames(SMALL, 1000, base_seed=33))
        assert np.mean(np.abs(h.astype(np.complex128)) ** 2) == pytest.approx(1.0, rel=0.05)

    def test_spatial_correlation_follows_kronecker(self):
        cfg = ChannelModelConfig(n_sc=2, n_s=1, n_r=2, n_t=1, rician_k_db=NLOS, rx_corr=0.6, tx_corr=0.0)
        h = stack_frames(generate_frames(cfg, 4000, base_seed=34)).astype(np.complex128)
        r01 = np.mean(h[..., 0, 0] * h[..., 1, 0].conj())
        assert r01.real == pytest.approx(0.6, abs=0.05)
