import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srirkit import dsp
from srirkit.errors import NoOnsetError
from srirkit.signals import BinauralIr, MonoIr, StftFrames

FS = 48000.0


def _sinc_delay(n, delay, half=24):
    """Independent band-limited fractional-delay construction for oracles."""
    out = np.zeros(n)
    base = int(np.floor(delay))
    for k in range(-half, half + 1):
        idx = base + k
        if 0 <= idx < n:
            v = idx - delay
            out[idx] = np.sinc(v) * np.hanning(2 * half + 1)[k + half]
    return out


class TestStft:
    def test_zero_signal_gives_zero_frames(self):
        frames = dsp.stft(MonoIr(np.zeros(1024), FS), 256, 128)
        assert np.all(frames.values == 0)

    def test_round_trip_50_percent_hop(self, rng):
        x = MonoIr(rng.normal(size=5000), FS)
        frames = dsp.stft(x, 512, 256)
        y = dsp.istft(frames)
        interior = dsp.cola_interior(frames)
        scale = np.abs(x.samples).max()
        err = np.abs(y.samples[interior] - x.samples[interior]).max()
        assert err / scale < 1e-9

    def test_sine_at_bin_center_concentrates_energy(self):
        window = 256
        bin_k = 10
        freq = bin_k * FS / window
        t = np.arange(2048) / FS
        x = MonoIr(np.sin(2 * np.pi * freq * t), FS)
        frames = dsp.stft(x, window, 128)

        # Direct DFT oracle for one frame.
        seg = x.samples[5 * 128 : 5 * 128 + window] * dsp._hann_periodic(window)
        k = np.arange(window // 2 + 1)
        dft = np.exp(-2j * np.pi * np.outer(k, np.arange(window)) / window) @ seg
        assert np.abs(frames.values[5] - dft).max() < 1e-9 * np.abs(dft).max()

        energy = np.abs(frames.values[5]) ** 2
        neighborhood = energy[bin_k - 1 : bin_k + 2].sum()
        assert neighborhood / energy.sum() >= 0.95

    def test_round_trip_preserves_energy_on_interior(self, rng):
        x = MonoIr(rng.normal(size=4096), FS)
        frames = dsp.stft(x, 256, 64)
        y = dsp.istft(frames)
        interior = dsp.cola_interior(frames)
        e_in = np.sum(x.samples[interior] ** 2)
        e_out = np.sum(y.samples[interior] ** 2)
        assert abs(e_out - e_in) / e_in < 1e-6

    def test_zero_frames_give_zero_signal(self):
        frames = StftFrames(np.zeros((8, 129), complex), 256, 128, FS)
        assert np.all(dsp.istft(frames).samples == 0)

    def test_invalid_arguments(self):
        x = MonoIr(np.zeros(100), FS)
        with pytest.raises(ValueError):
            dsp.stft(x, 256, 128)  # window larger than signal
        with pytest.raises(ValueError):
            dsp.stft(MonoIr(np.zeros(1000), FS), 200, 100)  # not a power of two
        with pytest.raises(ValueError):
            dsp.stft(MonoIr(np.zeros(1000), FS), 256, 96)  # hop does not divide
        with pytest.raises(ValueError):
            dsp.stft(MonoIr(np.zeros(1000), FS), 256, 256)  # no overlap: non-COLA


class TestConvolve:
    def test_identity_with_delta(self, rng):
        x = MonoIr(rng.normal(size=100), FS)
        delta = MonoIr(np.array([1.0]), FS)
        out = dsp.fft_convolve(x, delta)
        assert np.allclose(out.samples, x.samples, atol=1e-12)

    def test_shift_property(self):
        a = np.zeros(32)
        a[3] = 1.0
        b = np.zeros(32)
        b[7] = 1.0
        out = dsp.fft_convolve(MonoIr(a, FS), MonoIr(b, FS))
        expected = np.zeros(63)
        expected[10] = 1.0
        assert np.allclose(out.samples, expected, atol=1e-12)

    def test_matches_direct_convolution_257_taps(self, rng):
        a = rng.normal(size=257)
        b = rng.normal(size=257)
        direct = np.zeros(513)
        for i, ai in enumerate(a):  # O(n^2) oracle
            direct[i : i + 257] += ai * b
        out = dsp.fft_convolve(MonoIr(a, FS), MonoIr(b, FS))
        assert np.abs(out.samples - direct).max() < 1e-10

    def test_rate_mismatch_rejected(self):
        with pytest.raises(ValueError):
            dsp.fft_convolve(MonoIr([1.0], FS), MonoIr([1.0], 44100.0))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), na=st.integers(1, 300), nb=st.integers(1, 300))
    def test_matches_direct_convolution_property(self, seed, na, nb):
        gen = np.random.default_rng(seed)
        a = gen.normal(size=na)
        b = gen.normal(size=nb)
        out = dsp.fft_convolve(MonoIr(a, FS), MonoIr(b, FS))
        assert len(out) == na + nb - 1
        direct = np.convolve(a, b)
        scale = max(1.0, np.abs(direct).max())
        assert np.abs(out.samples - direct).max() / scale < 1e-10

    def test_matches_direct_convolution_at_length_bound(self, rng):
        a = rng.normal(size=4096)
        b = rng.normal(size=2731)
        out = dsp.fft_convolve(MonoIr(a, FS), MonoIr(b, FS))
        direct = np.convolve(a, b)
        assert np.abs(out.samples - direct).max() / np.abs(direct).max() < 1e-10


class TestCrossCorrelate:
    def test_autocorrelation_peaks_at_zero(self, rng):
        x = MonoIr(rng.normal(size=500), FS)
        corr = dsp.cross_correlate(x, x, 50)
        assert np.argmax(corr) == 50

    def test_delayed_copy_peaks_at_positive_lag(self, rng):
        sig = rng.normal(size=400)
        a = MonoIr(sig, FS)
        b = MonoIr(np.roll(sig, 5), FS)  # b[n] = a[n - 5]
        corr = dsp.cross_correlate(a, b, 20)
        assert np.argmax(corr) - 20 == 5

    def test_parabolic_refinement_half_sample(self):
        a = MonoIr(_sinc_delay(512, 100.0), FS)
        b = MonoIr(_sinc_delay(512, 100.5), FS)
        corr = dsp.cross_correlate(a, b, 10)
        lag = dsp.correlation_peak_lag(corr, 10, refine=True)
        assert lag == pytest.approx(0.5, abs=0.05)

    def test_invalid_arguments(self):
        x = MonoIr(np.ones(10), FS)
        with pytest.raises(ValueError):
            dsp.cross_correlate(x, MonoIr(np.ones(9), FS), 5)
        with pytest.raises(ValueError):
            dsp.cross_correlate(x, x, 10)  # max_lag not < length
        with pytest.raises(ValueError):
            dsp.cross_correlate(x, MonoIr(np.ones(10), 44100.0), 5)


class TestOnset:
    def _brir(self, left, right):
        return BinauralIr(MonoIr(left, FS), MonoIr(right, FS))

    def test_unit_impulse_at_100(self):
        x = np.zeros(300)
        x[100] = 1.0
        assert dsp.detect_onset(self._brir(x, x.copy())) == 100

    def test_impulse_over_noise_floor(self, rng):
        noise = rng.normal(scale=10 ** (-60 / 20), size=400)
        x = noise.copy()
        x[100] += 1.0
        assert dsp.detect_onset(self._brir(x, noise.copy())) == 100

    def test_earliest_channel_wins(self):
        left = np.zeros(300)
        left[120] = 1.0
        right = np.zeros(300)
        right[90] = 1.0
        assert dsp.detect_onset(self._brir(left, right)) == 90

    def test_all_zero_raises(self):
        with pytest.raises(NoOnsetError):
            dsp.detect_onset(self._brir(np.zeros(100), np.zeros(100)))

    def test_gain_invariance(self, rng):
        x = rng.normal(size=500) * np.exp(-np.arange(500) / 50.0)
        x[40] += 3.0
        brir = self._brir(x, x.copy())
        scaled = self._brir(100.0 * x, 100.0 * x)
        assert dsp.detect_onset(brir) == dsp.detect_onset(scaled)


class TestNormalizeDirectEnergy:
    def _brir(self, rng, n=1000):
        left = rng.normal(size=n) * np.exp(-np.arange(n) / 100.0)
        left[50] += 2.0
        right = 0.7 * rng.normal(size=n) * np.exp(-np.arange(n) / 100.0)
        right[50] += 1.0
        return BinauralIr(MonoIr(left, FS), MonoIr(right, FS))

    def test_segment_rms_becomes_one(self, rng):
        out = dsp.normalize_direct_energy(self._brir(rng))
        start, stop = dsp.direct_segment(out)
        seg = out.as_matrix()[:, start:stop]
        assert np.sqrt(np.mean(seg**2)) == pytest.approx(1.0, abs=1e-9)

    def test_scale_invariance(self, rng):
        brir = self._brir(rng)
        out1 = dsp.normalize_direct_energy(brir)
        scaled = BinauralIr(brir.left.scaled(10.0), brir.right.scaled(10.0))
        out2 = dsp.normalize_direct_energy(scaled)
        assert np.allclose(out1.left.samples, out2.left.samples, atol=1e-12)
        assert np.allclose(out1.right.samples, out2.right.samples, atol=1e-12)

    def test_idempotent(self, rng):
        once = dsp.normalize_direct_energy(self._brir(rng))
        twice = dsp.normalize_direct_energy(once)
        assert np.allclose(once.left.samples, twice.left.samples, atol=1e-12)

    def test_too_short_tail_rejected(self):
        x = np.zeros(80)
        x[70] = 1.0  # fewer than 2.5 ms after onset
        with pytest.raises(ValueError):
            dsp.normalize_direct_energy(BinauralIr(MonoIr(x, FS), MonoIr(x, FS)))


def test_place_fractional_impulses_integer_delay_is_exact():
    out = np.zeros(64)
    dsp.place_fractional_impulses(out, np.array([30.0]), np.array([1.5]))
    assert out[30] == pytest.approx(1.5, abs=0.0)
    out[30] = 0.0
    assert np.abs(out).max() < 1e-12


def test_place_fractional_impulses_counts_truncated():
    out = np.zeros(64)
    n = dsp.place_fractional_impulses(out, np.array([30.0, 500.0]), np.ones(2))
    assert n == 1
