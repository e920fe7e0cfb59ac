"""Head-related impulse response sets: container, loaders, and a synthetic
spherical-head model used wherever measured HRIRs are unavailable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import place_fractional_impulses
from .grids import direction_from_azel
from .signals import BinauralIr, MonoIr
from . import wavio


@dataclass(frozen=True)
class HrirSet:
    """One left/right impulse response pair per unit direction."""

    directions: np.ndarray  # (n, 3)
    left: np.ndarray  # (n, taps)
    right: np.ndarray  # (n, taps)
    sample_rate: float

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=np.float64)
        left = np.asarray(self.left, dtype=np.float64)
        right = np.asarray(self.right, dtype=np.float64)
        if dirs.ndim != 2 or dirs.shape[1] != 3:
            raise ValueError(f"directions must be (n, 3), got {dirs.shape}")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("HRIR directions must be unit vectors")
        if left.shape != right.shape or left.shape[0] != dirs.shape[0]:
            raise ValueError("left/right arrays must be (n, taps) matching directions")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        # Duplicate directions would make nearest-direction lookups ambiguous.
        gram = np.clip(dirs @ dirs.T, -1.0, 1.0)
        np.fill_diagonal(gram, -1.0)
        if gram.max() > 1.0 - 1e-12:
            raise ValueError("HRIR directions must be distinct")
        dirs = dirs / norms[:, None]
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __len__(self) -> int:
        return int(self.directions.shape[0])

    @property
    def length(self) -> int:
        return int(self.left.shape[1])

    def pair(self, index: int) -> BinauralIr:
        return BinauralIr(
            MonoIr(self.left[index], self.sample_rate),
            MonoIr(self.right[index], self.sample_rate),
        )

    def nearest_index(self, direction) -> int:
        u = np.asarray(direction, dtype=np.float64)
        u = u / np.linalg.norm(u)
        return int(np.argmax(self.directions @ u))

    def nearest_indices(self, directions: np.ndarray) -> np.ndarray:
        dirs = np.asarray(directions, dtype=np.float64)
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        return np.argmax(dirs @ self.directions.T, axis=1)


_EAR_AXIS_LEFT = np.array([0.0, 1.0, 0.0])


def _woodworth_delay(cos_theta: np.ndarray, head_radius: float, c: float) -> np.ndarray:
    """Arrival-time offset of one ear relative to the head center (seconds)."""
    theta = np.arccos(np.clip(cos_theta, -1.0, 1.0))
    ipsi = -head_radius / c * np.clip(cos_theta, 0.0, None)
    contra = head_radius / c * (theta - np.pi / 2.0)
    return np.where(cos_theta >= 0.0, ipsi, contra)


def spherical_head_hrir_set(directions: np.ndarray, sample_rate: float = 48000.0,
                            length: int = 128, head_radius: float = 0.0875,
                            shadow_floor: float = 0.3) -> HrirSet:
    """Synthetic HRIRs from a rigid-sphere delay/shadow approximation.

    Each ear receives a band-limited impulse at the Woodworth arrival time
    with a broadband gain that falls smoothly from 1 (source at the ear)
    to ``shadow_floor`` (source opposite the ear). Left/right symmetric, so
    frontal sources produce near-zero ITD and ILD. This is deliberately a
    stand-in for a measured dataset: adequate for validating pipelines, not
    for listening.
    """
    dirs = np.asarray(directions, dtype=np.float64)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    base_delay_s = 0.8e-3
    c = 343.0

    out = {}
    for side, axis in (("left", _EAR_AXIS_LEFT), ("right", -_EAR_AXIS_LEFT)):
        cos_theta = dirs @ axis
        delays = (base_delay_s + _woodworth_delay(cos_theta, head_radius, c)) * sample_rate
        gains = shadow_floor + (1.0 - shadow_floor) * 0.5 * (1.0 + cos_theta)
        bank = np.zeros((dirs.shape[0], length))
        for i in range(dirs.shape[0]):
            place_fractional_impulses(bank[i], delays[i : i + 1], gains[i : i + 1])
        out[side] = bank

    return HrirSet(dirs, out["left"], out["right"], sample_rate)


def load_hrir_set(index_path, wav_path=None) -> HrirSet:
    """Load HRIRs described by an index CSV of (azimuth_deg, elevation_deg, ...).

    Two layouts are supported:

    - per-direction stereo WAVs: rows ``azimuth,elevation,filename`` with
      filenames relative to the index file's directory;
    - one interleaved multichannel WAV (``wav_path``): rows
      ``azimuth,elevation`` in channel order, direction i occupying
      channels 2i (left) and 2i+1 (right).
    """
    index_path = Path(index_path)
    rows = []
    with index_path.open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            rows.append([cell.strip() for cell in row])
    if not rows:
        raise ValueError(f"{index_path}: empty HRIR index")

    directions = np.array(
        [direction_from_azel(float(r[0]), float(r[1])) for r in rows]
    )

    if wav_path is not None:
        data, rate = wavio.read_wav(wav_path)
        if data.shape[0] != 2 * len(rows):
            raise ValueError(
                f"{wav_path}: expected {2 * len(rows)} channels for "
                f"{len(rows)} directions, found {data.shape[0]}"
            )
        left = data[0::2]
        right = data[1::2]
        return HrirSet(directions, left, right, rate)

    lefts, rights, rate = [], [], None
    for r in rows:
        if len(r) < 3:
            raise ValueError(f"{index_path}: rows need a filename column")
        data, this_rate = wavio.read_wav(index_path.parent / r[2])
        if data.shape[0] != 2:
            raise ValueError(f"{r[2]}: HRIR files must be stereo")
        if rate is None:
            rate = this_rate
        elif this_rate != rate:
            raise ValueError(f"{r[2]}: sample rate {this_rate} != {rate}")
        lefts.append(data[0])
        rights.append(data[1])
    lengths = {arr.size for arr in lefts}
    if len(lengths) != 1:
        raise ValueError(f"{index_path}: HRIR lengths differ: {sorted(lengths)}")
    return HrirSet(directions, np.stack(lefts), np.stack(rights), rate)
