"""Foundational DSP primitives: STFT/ISTFT, convolution, cross-correlation,
onset detection, and direct-sound energy normalization.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from .errors import DegenerateInputError, NoOnsetError
from .signals import BinauralIr, MonoIr, StftFrames

#: Default onset threshold relative to the global peak, in dB. A common
#: room-acoustics convention that tolerates measurement noise floors.
ONSET_THRESHOLD_DB = -20.0


def _hann_periodic(n: int) -> np.ndarray:
    # Periodic Hann: exact constant-overlap-add for hop = n / k, k >= 2.
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft(ir: MonoIr, window_size: int, hop: int) -> StftFrames:
    """Hann-windowed short-time Fourier transform.

    Frame i covers samples ``[i*hop, i*hop + window_size)``; no padding is
    applied, so every frame lies fully inside the signal.

    Parameters
    ----------
    ir : MonoIr
    window_size : int
        Power of two, <= signal length.
    hop : int
        Must divide window_size with window_size // hop >= 2 (COLA for Hann).
    """
    n = len(ir)
    if window_size < 2 or (window_size & (window_size - 1)) != 0:
        raise ValueError(f"window_size must be a power of two, got {window_size}")
    if window_size > n:
        raise ValueError(f"window_size {window_size} exceeds signal length {n}")
    if hop <= 0 or window_size % hop != 0 or window_size // hop < 2:
        raise ValueError(
            f"hop {hop} is not COLA-valid for window {window_size}"
            " (must divide it with at least 2x overlap)"
        )

    window = _hann_periodic(window_size)
    n_frames = 1 + (n - window_size) // hop
    starts = np.arange(n_frames) * hop
    frames = ir.samples[starts[:, None] + np.arange(window_size)] * window
    values = np.fft.rfft(frames, axis=1)
    return StftFrames(values, window_size, hop, ir.sample_rate)


def istft(frames: StftFrames) -> MonoIr:
    """Weighted overlap-add inverse of :func:`stft`.

    Applies the Hann window a second time on synthesis and divides by the
    accumulated squared window, which reconstructs the input exactly
    wherever window coverage is complete (the COLA-valid interior) and
    behaves gracefully when the frames were modified.
    """
    window_size, hop = frames.window_size, frames.hop
    if hop <= 0 or window_size % hop != 0 or window_size // hop < 2:
        raise ValueError("frames carry a non-COLA window/hop combination")

    window = _hann_periodic(window_size)
    n_frames = frames.frame_count
    out_len = (n_frames - 1) * hop + window_size
    acc = np.zeros(out_len)
    wsum = np.zeros(out_len)

    chunks = np.fft.irfft(frames.values, n=window_size, axis=1) * window
    for i in range(n_frames):
        acc[i * hop : i * hop + window_size] += chunks[i]
        wsum[i * hop : i * hop + window_size] += window * window

    nonzero = wsum > 1e-12
    acc[nonzero] /= wsum[nonzero]
    return MonoIr(acc, frames.sample_rate)


def cola_interior(frames: StftFrames) -> slice:
    """Sample range (into the istft output) with complete window coverage."""
    start = frames.window_size - frames.hop
    stop = frames.frame_count * frames.hop
    return slice(start, stop)


def fft_convolve(a: MonoIr, b: MonoIr) -> MonoIr:
    """Full linear convolution, length ``len(a) + len(b) - 1``."""
    if a.sample_rate != b.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: {a.sample_rate} vs {b.sample_rate}"
        )
    return MonoIr(sps.fftconvolve(a.samples, b.samples, mode="full"), a.sample_rate)


def cross_correlate(a: MonoIr, b: MonoIr, max_lag: int) -> np.ndarray:
    """Raw (unnormalized) cross-correlation over lags ``-max_lag..+max_lag``.

    The value at lag tau is ``sum_n a[n] * b[n + tau]``: if ``b`` is ``a``
    delayed by d samples, the peak sits at lag +d. Raw values are returned
    because peak location is normalization-invariant; the coefficient form
    lives in the IACC metric.
    """
    if a.sample_rate != b.sample_rate:
        raise ValueError("sample-rate mismatch")
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not 0 <= max_lag < len(a):
        raise ValueError(f"max_lag must be in [0, {len(a) - 1}], got {max_lag}")
    full = sps.correlate(b.samples, a.samples, mode="full", method="auto")
    center = len(a) - 1
    return full[center - max_lag : center + max_lag + 1]


def parabolic_peak(values: np.ndarray, index: int) -> float:
    """Refine a discrete peak position by 3-point parabolic interpolation.

    Returns a float index; falls back to the integer position at the array
    boundary or when the neighborhood is flat.
    """
    if index <= 0 or index >= len(values) - 1:
        return float(index)
    y0, y1, y2 = values[index - 1], values[index], values[index + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return float(index)
    delta = 0.5 * (y0 - y2) / denom
    return float(index) + float(np.clip(delta, -1.0, 1.0))


def correlation_peak_lag(corr: np.ndarray, max_lag: int, refine: bool = True) -> float:
    """Lag of the correlation maximum, optionally sub-sample refined."""
    if len(corr) != 2 * max_lag + 1:
        raise ValueError("corr length does not match max_lag")
    peak = int(np.argmax(corr))
    pos = parabolic_peak(corr, peak) if refine else float(peak)
    return pos - max_lag


#: Half-width of the windowed-sinc interpolator used for fractional delays
#: (support is 2 * half + 1 taps).
FRACTIONAL_DELAY_HALF = 16
_KAISER_BETA = 8.6


def place_fractional_impulses(out: np.ndarray, delays_samples: np.ndarray,
                              amplitudes: np.ndarray) -> int:
    """Accumulate band-limited impulses at fractional sample positions.

    Each impulse is a Kaiser-windowed sinc with the window tracking the sinc
    peak, so arrival times stay sub-sample exact and an integer delay
    reduces to an exact unit impulse. Impulses whose support does not fit
    inside ``out`` are dropped; the return value counts how many were
    truncated.
    """
    delays = np.asarray(delays_samples, dtype=np.float64)
    amps = np.asarray(amplitudes, dtype=np.float64)
    half = FRACTIONAL_DELAY_HALF
    base = np.floor(delays).astype(np.int64)
    frac = delays - base
    offsets = np.arange(-half, half + 1)
    idx = base[:, None] + offsets[None, :]
    v = offsets[None, :] - frac[:, None]
    arg = 1.0 - (v / half) ** 2
    window = np.where(
        arg > 0.0, np.i0(_KAISER_BETA * np.sqrt(np.maximum(arg, 0.0))), 0.0
    ) / np.i0(_KAISER_BETA)
    values = np.sinc(v) * window * amps[:, None]

    inside = (idx >= 0) & (idx < out.size)
    complete = inside.all(axis=1)
    keep = inside & complete[:, None]
    np.add.at(out, idx[keep], values[keep])
    return int(np.count_nonzero(~complete))


def detect_onset(brir: BinauralIr, threshold_db: float = ONSET_THRESHOLD_DB) -> int:
    """Index of the earliest arrival in either channel.

    First sample whose magnitude exceeds ``threshold_db`` relative to the
    global peak magnitude across both channels.
    """
    mags = np.abs(brir.as_matrix())
    peak = mags.max()
    if peak <= 0.0:
        raise NoOnsetError("all-zero input has no onset")
    threshold = peak * 10.0 ** (threshold_db / 20.0)
    hits = np.nonzero((mags >= threshold).any(axis=0))[0]
    return int(hits[0])


def direct_segment(brir: BinauralIr, duration_s: float = 2.5e-3,
                   threshold_db: float = ONSET_THRESHOLD_DB) -> tuple[int, int]:
    """Onset index and exclusive end of the direct-sound segment."""
    onset = detect_onset(brir, threshold_db)
    seg_len = int(round(duration_s * brir.sample_rate))
    if onset + seg_len > len(brir):
        raise ValueError(
            f"signal too short: need {seg_len} samples after onset {onset}, "
            f"have {len(brir) - onset}"
        )
    return onset, onset + seg_len


def normalize_direct_energy(brir: BinauralIr, duration_s: float = 2.5e-3,
                            threshold_db: float = ONSET_THRESHOLD_DB) -> BinauralIr:
    """Scale both channels so the direct-sound segment has unit joint RMS.

    The RMS is taken jointly over both channels' samples in the segment
    starting at the onset; per-channel normalization would destroy the ILD.
    """
    start, stop = direct_segment(brir, duration_s, threshold_db)
    seg = brir.as_matrix()[:, start:stop]
    rms = float(np.sqrt(np.mean(seg * seg)))
    if rms <= 0.0:
        raise DegenerateInputError("direct segment carries no energy")
    return BinauralIr(brir.left.scaled(1.0 / rms), brir.right.scaled(1.0 / rms))
