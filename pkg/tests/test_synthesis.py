import numpy as np
import pytest

from srirkit.doa import DoaTrajectory, TfDoaField
from srirkit.dsp import istft, stft
from srirkit.errors import MissingHrirError
from srirkit.grids import fibonacci_grid
from srirkit.hrir import spherical_head_hrir_set
from srirkit.signals import MonoIr, StftFrames
from srirkit.synthesis import (
    DECORRELATOR_TAPS,
    VirtualLoudspeakerSignals,
    binaural_render,
    decorrelate,
    sdm_synthesize,
    sirr_synthesize,
    sirr_tf_streams,
)
from srirkit.vbap import vbap_gains

FS = 48000.0


def _random_trajectory(rng, n, invalid_fraction=0.0):
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    valid = rng.uniform(size=n) >= invalid_fraction
    dirs[~valid] = 0.0
    return DoaTrajectory(dirs, valid)


class TestSdmSynthesize:
    def test_impulse_at_grid_vertex_lands_whole(self):
        grid = fibonacci_grid(24)
        n = 64
        pressure = MonoIr(np.zeros(n) + np.eye(1, n, 10)[0], FS)
        dirs = np.tile(grid.directions[5], (n, 1))
        traj = DoaTrajectory(dirs, np.ones(n, bool))
        vls = sdm_synthesize(pressure, traj, grid, k=1)
        assert vls.samples[5, 10] == 1.0
        total = vls.samples.copy()
        total[5, 10] = 0.0
        assert np.all(total == 0.0)

    def test_per_sample_energy_exact_k1(self, rng):
        grid = fibonacci_grid(16)
        n = 500
        pressure = MonoIr(rng.normal(size=n), FS)
        traj = _random_trajectory(rng, n, invalid_fraction=0.2)
        vls = sdm_synthesize(pressure, traj, grid, k=1)
        # bit-level: each sample appears verbatim on exactly one speaker
        nonzero_counts = np.count_nonzero(vls.samples, axis=0)
        assert np.all(nonzero_counts <= 1)
        col_sum = vls.samples.sum(axis=0)
        assert np.array_equal(col_sum, pressure.samples)
        assert np.array_equal(
            np.sum(vls.samples**2, axis=0), pressure.samples**2
        )

    def test_per_sample_energy_k3(self, rng):
        grid = fibonacci_grid(32)
        n = 300
        pressure = MonoIr(rng.normal(size=n), FS)
        traj = _random_trajectory(rng, n)
        vls = sdm_synthesize(pressure, traj, grid, k=3)
        energy = np.sum(vls.samples**2, axis=0)
        assert np.abs(energy - pressure.samples**2).max() < 1e-12

    def test_invalid_samples_inherit_previous_assignment(self):
        grid = fibonacci_grid(16)
        n = 12
        dirs = np.zeros((n, 3))
        valid = np.zeros(n, bool)
        dirs[4] = grid.directions[9]
        valid[4] = True
        traj = DoaTrajectory(dirs, valid)
        pressure = MonoIr(np.ones(n), FS)
        vls = sdm_synthesize(pressure, traj, grid, k=1)
        # after sample 4 everything inherits speaker 9
        assert np.all(vls.samples[9, 4:] == 1.0)
        # before the first valid sample, the frontal speaker carries it
        frontal = int(np.argmax(grid.directions @ np.array([1.0, 0.0, 0.0])))
        assert np.all(vls.samples[frontal, :4] == 1.0)

    def test_length_mismatch_rejected(self, rng):
        grid = fibonacci_grid(8)
        with pytest.raises(ValueError):
            sdm_synthesize(
                MonoIr(np.ones(10), FS), _random_trajectory(rng, 9), grid
            )

    def test_deterministic(self, rng):
        grid = fibonacci_grid(16)
        n = 200
        pressure = MonoIr(rng.normal(size=n), FS)
        traj = _random_trajectory(rng, n, invalid_fraction=0.1)
        a = sdm_synthesize(pressure, traj, grid, k=2)
        b = sdm_synthesize(pressure, traj, grid, k=2)
        assert np.array_equal(a.samples, b.samples)


def _smooth_field(rng, frames, bins, window_size, hop):
    """Direction field varying slowly over time, random psi."""
    base = rng.normal(size=3)
    base /= np.linalg.norm(base)
    dirs = np.tile(base, (frames, bins, 1))
    psi = np.clip(rng.uniform(0.0, 1.0, size=(frames, bins)), 0.0, 1.0)
    return TfDoaField(dirs, psi, window_size, hop, FS)


class TestSirrSynthesize:
    def _framed_noise(self, rng, n=8192, window=256):
        sig = rng.normal(size=n)
        sig[: window] = 0.0
        sig[-window:] = 0.0
        return sig, stft(MonoIr(sig, FS), window, window // 2)

    def test_psi_zero_matches_pure_vbap_pan(self, rng):
        grid = fibonacci_grid(12)
        sig, frames = self._framed_noise(rng, n=2048, window=128)
        t, f = frames.values.shape
        dirs = rng.normal(size=(t, f, 3))
        dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
        field = TfDoaField(dirs, np.zeros((t, f)), 128, 64, FS)
        vls = sirr_synthesize(frames, field, grid, seed=3)

        # no diffuse tail beyond the istft length
        time_len = (t - 1) * 64 + 128
        assert np.all(vls.samples[:, time_len:] == 0.0)

        # expected: per-bin VBAP pan through the public single-query API
        expected_tf = np.zeros((len(grid), t, f), dtype=complex)
        for ti in range(t):
            for fi in range(f):
                for s, g in vbap_gains(dirs[ti, fi], grid).gains.items():
                    expected_tf[s, ti, fi] = g * frames.values[ti, fi]
        for s in range(len(grid)):
            expected = istft(StftFrames(expected_tf[s], 128, 64, FS)).samples
            assert np.abs(vls.samples[s, :time_len] - expected).max() < 1e-6

    def test_psi_one_output_ignores_directions(self, rng):
        grid = fibonacci_grid(12)
        _, frames = self._framed_noise(rng, n=2048, window=128)
        t, f = frames.values.shape
        ones = np.ones((t, f))
        dirs_a = rng.normal(size=(t, f, 3))
        dirs_a /= np.linalg.norm(dirs_a, axis=2, keepdims=True)
        dirs_b = rng.normal(size=(t, f, 3))
        dirs_b /= np.linalg.norm(dirs_b, axis=2, keepdims=True)
        a = sirr_synthesize(frames, TfDoaField(dirs_a, ones, 128, 64, FS), grid, seed=1)
        b = sirr_synthesize(frames, TfDoaField(dirs_b, ones, 128, 64, FS), grid, seed=1)
        assert np.array_equal(a.samples, b.samples)  # direct stream is zero

    def test_per_bin_energy_split_exact(self, rng):
        grid = fibonacci_grid(20)
        _, frames = self._framed_noise(rng)
        t, f = frames.values.shape
        dirs = rng.normal(size=(t, f, 3))
        dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
        psi = np.clip(rng.uniform(size=(t, f)), 0, 1)
        field = TfDoaField(dirs, psi, frames.window_size, frames.hop, FS)
        direct_tf, diffuse_tf = sirr_tf_streams(frames, field, grid)
        total = np.sum(np.abs(direct_tf) ** 2, axis=0) + len(grid) * np.abs(diffuse_tf) ** 2
        reference = np.abs(frames.values) ** 2
        scale = reference.max()
        assert np.abs(total - reference).max() / scale < 1e-6

    def test_broadband_energy_preserved_smooth_field(self, rng):
        grid = fibonacci_grid(24)
        sig, frames = self._framed_noise(rng)
        t, f = frames.values.shape
        field = _smooth_field(rng, t, f, frames.window_size, frames.hop)
        vls = sirr_synthesize(frames, field, grid, seed=9)
        ratio_db = 10 * np.log10(np.sum(vls.samples**2) / np.sum(sig**2))
        assert abs(ratio_db) < 0.5

    def test_metadata_mismatch_rejected(self, rng):
        grid = fibonacci_grid(8)
        _, frames = self._framed_noise(rng, n=2048, window=128)
        bad = _smooth_field(rng, 3, 5, 64, 32)
        with pytest.raises(ValueError):
            sirr_synthesize(frames, bad, grid, seed=0)

    def test_seed_determinism(self, rng):
        grid = fibonacci_grid(8)
        _, frames = self._framed_noise(rng, n=2048, window=128)
        t, f = frames.values.shape
        field = _smooth_field(rng, t, f, 128, 64)
        a = sirr_synthesize(frames, field, grid, seed=42)
        b = sirr_synthesize(frames, field, grid, seed=42)
        c = sirr_synthesize(frames, field, grid, seed=43)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)


class TestDecorrelate:
    def test_zero_in_zero_out(self):
        out = decorrelate(MonoIr(np.zeros(1000), FS), seed=0, channel_index=0)
        assert np.all(out.samples == 0.0)

    def test_energy_preserved_on_white_noise(self, rng):
        x = MonoIr(rng.normal(size=24000), FS)
        out = decorrelate(x, seed=1, channel_index=4)
        ratio_db = 10 * np.log10(
            np.sum(out.samples**2) / np.sum(x.samples**2)
        )
        assert abs(ratio_db) < 0.1
        assert len(out) == len(x) + DECORRELATOR_TAPS - 1

    def test_channels_decorrelated(self, rng):
        from scipy import signal as sps

        x = MonoIr(rng.normal(size=24000), FS)
        a = decorrelate(x, seed=5, channel_index=0)
        b = decorrelate(x, seed=5, channel_index=1)
        energy = np.sqrt(np.sum(a.samples**2) * np.sum(b.samples**2))
        peak = np.abs(sps.correlate(a.samples, b.samples, mode="full")).max()
        assert peak / energy < 0.3

    def test_deterministic_in_seed_and_channel(self, rng):
        x = MonoIr(rng.normal(size=512), FS)
        a = decorrelate(x, seed=7, channel_index=2)
        b = decorrelate(x, seed=7, channel_index=2)
        assert np.array_equal(a.samples, b.samples)


class TestBinauralRender:
    def _setup(self, n_speakers=16, n=256):
        grid = fibonacci_grid(n_speakers)
        hrirs = spherical_head_hrir_set(grid.directions, sample_rate=FS, length=128)
        return grid, hrirs

    def test_single_delta_channel_reproduces_hrir(self):
        grid, hrirs = self._setup()
        samples = np.zeros((len(grid), 64))
        samples[3, 0] = 1.0
        vls = VirtualLoudspeakerSignals(grid, samples, FS)
        brir = binaural_render(vls, hrirs)
        assert np.allclose(brir.left.samples[:128], hrirs.left[3], atol=1e-12)
        assert np.allclose(brir.right.samples[:128], hrirs.right[3], atol=1e-12)

    def test_linearity(self, rng):
        grid, hrirs = self._setup()
        a = rng.normal(size=(len(grid), 100))
        b = rng.normal(size=(len(grid), 100))
        render = lambda s: binaural_render(VirtualLoudspeakerSignals(grid, s, FS), hrirs)
        out_ab = render(a + b)
        out_a, out_b = render(a), render(b)
        assert np.abs(
            out_ab.left.samples - out_a.left.samples - out_b.left.samples
        ).max() < 1e-10

    def test_two_delta_channels_sum_exactly(self):
        grid, hrirs = self._setup()
        samples = np.zeros((len(grid), 64))
        samples[2, 5] = 1.0
        samples[9, 11] = -0.5
        vls = VirtualLoudspeakerSignals(grid, samples, FS)
        brir = binaural_render(vls, hrirs)
        expected_l = np.zeros(64 + 128 - 1)
        expected_l[5 : 5 + 128] += hrirs.left[2]
        expected_l[11 : 11 + 128] += -0.5 * hrirs.left[9]
        assert np.abs(brir.left.samples - expected_l).max() < 1e-12

    def test_time_shift_commutes(self, rng):
        grid, hrirs = self._setup()
        sig = rng.normal(size=(len(grid), 80))
        shifted = np.concatenate([np.zeros((len(grid), 7)), sig], axis=1)
        render = lambda s: binaural_render(VirtualLoudspeakerSignals(grid, s, FS), hrirs)
        base = render(sig)
        moved = render(shifted)
        # FFT-based convolution at the longer length rounds differently, so
        # the shift equivalence holds to float precision rather than bitwise.
        assert np.abs(moved.left.samples[:7]).max() < 1e-12
        assert np.abs(
            moved.left.samples[7 : 7 + len(base.left)] - base.left.samples
        ).max() < 1e-12

    def test_missing_hrir_reported(self):
        grid = fibonacci_grid(32)
        sparse = spherical_head_hrir_set(fibonacci_grid(6).directions, sample_rate=FS)
        vls = VirtualLoudspeakerSignals(grid, np.zeros((32, 16)), FS)
        with pytest.raises(MissingHrirError) as info:
            binaural_render(vls, sparse)
        assert len(info.value.offenders) > 0

    def test_rate_mismatch_rejected(self):
        grid, _ = self._setup()
        hrirs44 = spherical_head_hrir_set(grid.directions, sample_rate=44100.0)
        vls = VirtualLoudspeakerSignals(grid, np.zeros((len(grid), 16)), FS)
        with pytest.raises(ValueError):
            binaural_render(vls, hrirs44)
