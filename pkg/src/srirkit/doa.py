"""Direction-of-arrival estimation: per-sample TDOA least squares (the SDM
front end), broadband band-limited pseudo-intensity vectors, and
time-frequency intensity analysis with diffuseness (the SIRR front end).

All estimators emit directions pointing from the array toward the source.
Pseudo-intensity estimates derive particle velocity as the negative of the
(x, y, z) channels (see :mod:`srirkit.arrays`), so the active intensity
points along propagation and the DOA is its negation.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .arrays import FoaSignal, MicArrayGeometry
from .errors import UnsupportedGeometryError
from .signals import MultichannelIr, StftFrames

_DEGENERATE_NORM = 1e-9


@dataclass(frozen=True)
class DoaConfig:
    """Analysis parameters shared by the DOA estimators.

    ``window_size`` is both the TDOA sliding-window length and the default
    intensity smoothing length; 64 samples at 48 kHz suits arrays with
    100 mm spacing. The band limits bracket the usable range of first-order
    estimates for such arrays (200 Hz up to the spatial aliasing limit).
    """

    window_size: int = 64
    band_low: float = 200.0
    band_high: float = 2400.0
    speed_of_sound: float = 343.0
    smoothing_window: int = 64
    gcc_weighting: str = "none"  # "none" (plain correlation) | "phat"

    def __post_init__(self):
        if self.window_size < 8:
            raise ValueError("window_size must be >= 8")
        if not (0.0 < self.band_low < self.band_high):
            raise ValueError("need 0 < band_low < band_high")
        if self.speed_of_sound <= 0:
            raise ValueError("speed_of_sound must be > 0")
        if self.smoothing_window < 1:
            raise ValueError("smoothing_window must be >= 1")
        if self.gcc_weighting not in ("none", "phat"):
            raise ValueError(f"unknown gcc_weighting {self.gcc_weighting!r}")


@dataclass(frozen=True)
class DoaTrajectory:
    """Per-sample unit directions aligned 1:1 with a pressure signal."""

    directions: np.ndarray  # (n, 3); zeros where invalid
    valid: np.ndarray  # (n,) bool

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if dirs.ndim != 2 or dirs.shape[1] != 3:
            raise ValueError(f"directions must be (n, 3), got {dirs.shape}")
        if valid.shape != (dirs.shape[0],):
            raise ValueError("validity mask must match direction count")
        if valid.any():
            norms = np.linalg.norm(dirs[valid], axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("valid directions must be unit vectors")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "valid", valid)

    def __len__(self) -> int:
        return int(self.directions.shape[0])

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample", "x", "y", "z", "valid"])
            for i in range(len(self)):
                x, y, z = self.directions[i]
                writer.writerow([i, f"{x:.9f}", f"{y:.9f}", f"{z:.9f}", int(self.valid[i])])


@dataclass(frozen=True)
class TfDoaField:
    """Per (frame, bin) direction and diffuseness, tied to an STFT layout."""

    directions: np.ndarray  # (frames, bins, 3)
    psi: np.ndarray  # (frames, bins) in [0, 1]
    window_size: int
    hop: int
    sample_rate: float

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=np.float64)
        psi = np.asarray(self.psi, dtype=np.float64)
        if dirs.ndim != 3 or dirs.shape[2] != 3:
            raise ValueError(f"directions must be (frames, bins, 3), got {dirs.shape}")
        if psi.shape != dirs.shape[:2]:
            raise ValueError("psi shape must match directions")
        if psi.min() < 0.0 or psi.max() > 1.0:
            raise ValueError("psi must lie in [0, 1]")
        norms = np.linalg.norm(dirs, axis=2)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("field directions must be unit vectors")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "psi", psi)

    def matches(self, frames: StftFrames) -> bool:
        return (
            self.directions.shape[:2] == frames.values.shape
            and self.window_size == frames.window_size
            and self.hop == frames.hop
            and self.sample_rate == frames.sample_rate
        )

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "bin", "x", "y", "z", "psi"])
            for t in range(self.directions.shape[0]):
                for b in range(self.directions.shape[1]):
                    x, y, z = self.directions[t, b]
                    writer.writerow(
                        [t, b, f"{x:.9f}", f"{y:.9f}", f"{z:.9f}", f"{self.psi[t, b]:.9f}"]
                    )


def _refine_peaks(corr: np.ndarray) -> np.ndarray:
    """Vectorized 3-point parabolic peak refinement along the last axis."""
    peaks = np.argmax(corr, axis=-1)
    idx = np.indices(peaks.shape)
    interior = (peaks > 0) & (peaks < corr.shape[-1] - 1)
    safe = np.where(interior, peaks, 1)
    y0 = corr[(*idx, safe - 1)]
    y1 = corr[(*idx, safe)]
    y2 = corr[(*idx, safe + 1)]
    denom = y0 - 2.0 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(np.abs(denom) > 0.0, 0.5 * (y0 - y2) / denom, 0.0)
    delta = np.clip(np.nan_to_num(delta), -1.0, 1.0)
    return peaks + np.where(interior, delta, 0.0)


def tdoa_ls_doa(srir: MultichannelIr, geometry: MicArrayGeometry,
                config: DoaConfig | None = None) -> DoaTrajectory:
    """Per-sample DOA from pairwise TDOAs solved in least squares.

    A Hann window centered on each sample (zero-padded at the edges) feeds
    cross-correlations for every capsule pair (unweighted by default;
    ``config.gcc_weighting="phat"`` switches to phase-transform weighting);
    the peak lags are parabolic-refined and the overdetermined system
    ``(r_i - r_j) . u = c * tau_ij`` is solved for the direction ``u``.
    Samples whose solution norm is degenerate (all-zero TDOAs, silent
    windows) are masked invalid rather than fabricated.
    """
    if config is None:
        config = DoaConfig()
    if srir.channel_count != geometry.capsule_count:
        raise ValueError(
            f"SRIR channel count {srir.channel_count} does not match geometry "
            f"({geometry.capsule_count} capsules)"
        )
    window = config.window_size
    n = len(srir)
    if window >= n:
        raise ValueError(f"window_size {window} must be smaller than the SRIR ({n})")

    rate = srir.sample_rate
    c = config.speed_of_sound
    data = srir.as_matrix()
    peak = np.abs(data).max()
    if peak > 0:
        # Gain-normalize so the degenerate-solution threshold below is
        # effectively invariant to positive scaling of the input.
        data = data / peak
    n_ch = data.shape[0]

    pairs = list(itertools.combinations(range(n_ch), 2))
    baselines = np.array([geometry.positions[i] - geometry.positions[j] for i, j in pairs])
    if np.linalg.matrix_rank(baselines, tol=1e-12) < 3:
        raise UnsupportedGeometryError("capsule pairs do not span 3-D space")
    solver = np.linalg.pinv(baselines)  # (3, n_pairs)

    # Per-pair lag bound: propagation across the baseline plus refinement slack.
    max_lags = np.ceil(np.linalg.norm(baselines, axis=1) / c * rate).astype(int) + 2
    max_lags = np.minimum(max_lags, window - 1)

    half = window // 2
    padded = np.pad(data, ((0, 0), (half, window - half)), mode="constant")
    taper = np.hanning(window)
    nfft = 2 * window

    tdoas = np.empty((n, len(pairs)))
    energies = np.empty(n)
    chunk = max(1, int(2_000_000 / (n_ch * window)))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        # frames[c, s] covers samples [s - half, s + half) of channel c
        frames = np.lib.stride_tricks.sliding_window_view(
            padded[:, start : stop + window - 1], window, axis=1
        )
        frames = frames * taper
        energies[start:stop] = np.sum(frames * frames, axis=(0, 2))
        spectra = np.fft.rfft(frames, n=nfft, axis=2)
        for p, (i, j) in enumerate(pairs):
            cross = np.conj(spectra[i]) * spectra[j]
            if config.gcc_weighting == "phat":
                mag = np.abs(cross)
                # Relative floor with an absolute backstop keeps denormal
                # bins from overflowing the division.
                floor = max(float(mag.max()) * 1e-12, 1e-290)
                cross = np.divide(
                    cross, mag, out=np.zeros_like(cross), where=mag > floor
                )
            corr = np.fft.irfft(cross, n=nfft, axis=1)
            ml = max_lags[p]
            lags = np.concatenate([corr[:, nfft - ml :], corr[:, : ml + 1]], axis=1)
            tdoas[start:stop, p] = (_refine_peaks(lags) - ml) / rate

    slowness = (solver @ (c * tdoas.T)).T  # (n, 3)
    norms = np.linalg.norm(slowness, axis=1)
    valid = (norms > _DEGENERATE_NORM) & (energies > 0.0)
    directions = np.zeros((n, 3))
    directions[valid] = slowness[valid] / norms[valid, None]
    return DoaTrajectory(directions, valid)


def _band_limit(samples: np.ndarray, rate: float, low: float, high: float) -> np.ndarray:
    nyquist = rate / 2.0
    if high >= nyquist:
        raise ValueError(f"band_high {high} Hz must be below Nyquist {nyquist} Hz")
    sos = sps.butter(2, [low / nyquist, high / nyquist], btype="bandpass", output="sos")
    return sps.sosfiltfilt(sos, samples, axis=-1)


def _smooth(values: np.ndarray, window: int) -> np.ndarray:
    """Centered Hann-weighted moving average along the last axis."""
    if window <= 1:
        return values
    kernel = np.hanning(window + 2)[1:-1]
    kernel /= kernel.sum()
    pad = [(0, 0)] * (values.ndim - 1) + [(window // 2, window - 1 - window // 2)]
    padded = np.pad(values, pad, mode="constant")
    out = np.apply_along_axis(lambda v: np.convolve(v, kernel, mode="valid"), -1, padded)
    return out


def piv_broadband_doa(foa: FoaSignal, config: DoaConfig | None = None) -> DoaTrajectory:
    """Per-sample DOA from band-limited pseudo-intensity vectors.

    All four channels are zero-phase band-passed to
    ``[band_low, band_high]``, the instantaneous intensity ``p * v`` is
    smoothed over ``smoothing_window`` samples, and its negation is
    normalized into a toward-source direction. Zero-intensity samples are
    masked invalid.
    """
    if config is None:
        config = DoaConfig()
    rate = foa.sample_rate
    pressure = _band_limit(foa.w.samples, rate, config.band_low, config.band_high)
    velocity = _band_limit(foa.velocity_matrix(), rate, config.band_low, config.band_high)

    intensity = pressure[None, :] * velocity  # (3, n), points away from source
    intensity = _smooth(intensity, config.smoothing_window)

    norms = np.linalg.norm(intensity, axis=0)
    scale = norms.max()
    valid = norms > max(_DEGENERATE_NORM * scale, 0.0) if scale > 0 else np.zeros(norms.shape, bool)
    directions = np.zeros((len(foa), 3))
    directions[valid] = (-intensity[:, valid] / norms[valid]).T
    return DoaTrajectory(directions, valid)


def tf_piv_analysis(w: StftFrames, x: StftFrames, y: StftFrames, z: StftFrames,
                    averaging_frames: int = 8) -> TfDoaField:
    """Per-bin direction and diffuseness from time-frequency intensity.

    Intensity and energy density are averaged over time with an exponential
    moving average of effective length ``averaging_frames``. Diffuseness is
    ``1 - |<I>| / <E>`` with channel scaling such that a single plane wave
    reaches exactly 0 and a zero-velocity field exactly 1; values are
    clamped to [0, 1]. Bins with no usable intensity keep a frontal
    placeholder direction.
    """
    for other in (x, y, z):
        if not w.same_layout(other):
            raise ValueError("FOA frame sets must share an identical STFT layout")
    if averaging_frames < 1:
        raise ValueError("averaging_frames must be >= 1")

    wv = w.values
    xyz = np.stack([x.values, y.values, z.values], axis=2)  # (t, f, 3)
    # Mic-convention product; physical intensity is its negation, and the
    # toward-source DOA negates that again.
    intensity = np.real(np.conj(wv)[:, :, None] * xyz)
    energy = 0.5 * (np.abs(wv) ** 2 + np.sum(np.abs(xyz) ** 2, axis=2))

    alpha = 1.0 / float(averaging_frames)
    avg_i = np.empty_like(intensity)
    avg_e = np.empty_like(energy)
    avg_i[0] = intensity[0]
    avg_e[0] = energy[0]
    for t in range(1, intensity.shape[0]):
        avg_i[t] = alpha * intensity[t] + (1.0 - alpha) * avg_i[t - 1]
        avg_e[t] = alpha * energy[t] + (1.0 - alpha) * avg_e[t - 1]

    norms = np.linalg.norm(avg_i, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = 1.0 - norms / avg_e
    psi = np.clip(np.nan_to_num(psi, nan=1.0, posinf=1.0, neginf=1.0), 0.0, 1.0)

    directions = np.zeros_like(avg_i)
    directions[..., 0] = 1.0  # frontal placeholder for degenerate bins
    usable = norms > 0.0
    directions[usable] = avg_i[usable] / norms[usable, None]
    return TfDoaField(directions, psi, w.window_size, w.hop, w.sample_rate)


def smooth_doa(trajectory: DoaTrajectory, window: int) -> DoaTrajectory:
    """Sliding vector mean over valid entries, renormalized.

    Invalid entries take the smoothed value of the nearest valid sample when
    one lies inside the window; otherwise they stay invalid. ``window`` must
    be odd (1 is the identity).
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    if window == 1 or len(trajectory) == 0:
        return trajectory

    dirs = np.where(trajectory.valid[:, None], trajectory.directions, 0.0)
    kernel = np.ones(window)
    sums = np.stack(
        [np.convolve(dirs[:, k], kernel, mode="same") for k in range(3)], axis=1
    )
    counts = np.convolve(trajectory.valid.astype(float), kernel, mode="same")
    norms = np.linalg.norm(sums, axis=1)
    smoothed_ok = (counts > 0.5) & (norms > _DEGENERATE_NORM)
    smoothed = np.zeros_like(sums)
    smoothed[smoothed_ok] = sums[smoothed_ok] / norms[smoothed_ok, None]

    out_dirs = np.zeros_like(smoothed)
    out_valid = np.zeros(len(trajectory), dtype=bool)

    ok = trajectory.valid & smoothed_ok
    out_dirs[ok] = smoothed[ok]
    out_valid[ok] = True

    # Fill invalid samples from the nearest valid neighbor within the window.
    valid_idx = np.nonzero(trajectory.valid)[0]
    if valid_idx.size:
        gaps = np.nonzero(~out_valid)[0]
        pos = np.searchsorted(valid_idx, gaps)
        left = valid_idx[np.clip(pos - 1, 0, valid_idx.size - 1)]
        right = valid_idx[np.clip(pos, 0, valid_idx.size - 1)]
        nearest = np.where(np.abs(gaps - left) <= np.abs(right - gaps), left, right)
        reachable = (np.abs(gaps - nearest) <= window // 2) & smoothed_ok[nearest]
        fill = gaps[reachable]
        out_dirs[fill] = smoothed[nearest[reachable]]
        out_valid[fill] = True

    return DoaTrajectory(out_dirs, out_valid)
