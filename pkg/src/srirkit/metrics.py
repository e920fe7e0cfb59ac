"""Objective binaural metrics and error summaries.

Sign conventions: positive ILD means the left channel is louder, positive
ITD means the left channel leads. ILD and ITD are computed on the 2.5 ms
direct-sound segment after onset detection; IACC uses the ISO 3382-1 early
window (first 80 ms after onset) and the remaining tail.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import dsp
from .errors import DegenerateBandError, DegenerateInputError, InsufficientDecayError
from .filterbanks import FilterbankSpec, erb_filterbank, erb_spec, octave_filter
from .signals import BinauralIr, MonoIr

#: Just-noticeable differences used for pass/fail flags in reports.
JND = {
    "ild_low_db": 1.0,
    "ild_high_db": 1.0,
    "itd_us": 40.0,
    "t30_mid_s": 0.05,  # fraction of the reference T30
    "one_minus_iacc_e3": 0.075,
    "one_minus_iacc_l3": 0.075,
}

ILD_SPLIT_HZ = 1500.0
IACC_MAX_LAG_S = 1e-3
EARLY_WINDOW_S = 80e-3
T30_BANDS_HZ = (500.0, 1000.0)
IACC_BANDS_HZ = (500.0, 1000.0, 2000.0)


@dataclass(frozen=True)
class MetricReport:
    """One system's metric values for a single BRIR."""

    ild_low_db: float
    ild_high_db: float
    itd_us: float
    t30_mid_s: float
    one_minus_iacc_e3: float
    one_minus_iacc_l3: float

    def __post_init__(self):
        if not self.t30_mid_s > 0:
            raise ValueError("t30_mid_s must be > 0")
        for name in ("one_minus_iacc_e3", "one_minus_iacc_l3"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.itd_us) > 1000.0:
            raise ValueError(f"|itd_us| must be <= 1000, got {self.itd_us}")

    @staticmethod
    def metric_names() -> list[str]:
        return [f.name for f in fields(MetricReport)]

    def to_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in self.metric_names()}

    def to_json(self) -> str:
        return json.dumps({"metrics": self.to_dict(), "jnd": JND}, indent=2, sort_keys=True)


@dataclass(frozen=True)
class ErrorSummary:
    """Per-metric mean absolute error and mean signed difference."""

    mae: dict
    msd: dict
    system_count: int
    jnd_pass: dict

    def __post_init__(self):
        for name, value in self.mae.items():
            if abs(self.msd[name]) > value + 1e-12:
                raise ValueError(f"MAE < |MSD| for {name}; summary is inconsistent")

    def to_json(self) -> str:
        return json.dumps(
            {
                "system_count": self.system_count,
                "mae": {k: float(v) for k, v in sorted(self.mae.items())},
                "msd": {k: float(v) for k, v in sorted(self.msd.items())},
                "jnd_pass": {k: bool(v) for k, v in sorted(self.jnd_pass.items())},
            },
            indent=2,
            sort_keys=True,
        )

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "mae", "msd", "jnd", "jnd_pass"])
            for name in MetricReport.metric_names():
                writer.writerow(
                    [name, f"{self.mae[name]:.9g}", f"{self.msd[name]:.9g}",
                     JND[name], int(self.jnd_pass[name])]
                )


def _band_rms_ratio_db(left_seg: MonoIr, right_seg: MonoIr,
                       spec: FilterbankSpec) -> np.ndarray:
    left_bands = erb_filterbank(left_seg, spec)
    right_bands = erb_filterbank(right_seg, spec)
    out = np.empty(spec.band_count)
    for i, (lb, rb) in enumerate(zip(left_bands, right_bands)):
        rms_l = float(np.sqrt(np.mean(lb.samples**2)))
        rms_r = float(np.sqrt(np.mean(rb.samples**2)))
        if rms_l <= 0.0:
            raise DegenerateBandError(i, spec.center_frequencies[i], "left")
        if rms_r <= 0.0:
            raise DegenerateBandError(i, spec.center_frequencies[i], "right")
        # Difference of logs (not log of ratio) so a channel swap negates
        # the ILD bit-exactly.
        out[i] = 20.0 * (np.log10(rms_l) - np.log10(rms_r))
    return out


def ild_avg(brir: BinauralIr, spec: FilterbankSpec | None = None,
            segment_s: float = 2.5e-3) -> tuple[float, float]:
    """ERB-band-averaged level difference of the direct-sound segment.

    Returns (low, high): band averages below and at-or-above 1.5 kHz, in dB,
    positive when the left channel is louder.
    """
    if spec is None:
        spec = erb_spec()
    start, stop = dsp.direct_segment(brir, segment_s)
    left = MonoIr(brir.left.samples[start:stop], brir.sample_rate)
    right = MonoIr(brir.right.samples[start:stop], brir.sample_rate)
    ratios = _band_rms_ratio_db(left, right, spec)
    centers = np.asarray(spec.center_frequencies)
    low = ratios[centers < ILD_SPLIT_HZ]
    high = ratios[centers >= ILD_SPLIT_HZ]
    if low.size == 0 or high.size == 0:
        raise ValueError("filterbank must span bands on both sides of 1.5 kHz")
    return float(low.mean()), float(high.mean())


def _iacf_peak(left: np.ndarray, right: np.ndarray, rate: float,
               refine: bool) -> tuple[float, float]:
    """(peak |IACF| coefficient, lag in seconds) over +/-1 ms."""
    energy = float(np.sqrt(np.sum(left**2) * np.sum(right**2)))
    if energy <= 0.0:
        raise DegenerateInputError("zero-energy channel in IACF analysis")
    max_lag = int(round(IACC_MAX_LAG_S * rate))
    l_ir = MonoIr(left, rate)
    r_ir = MonoIr(right, rate)
    corr = np.abs(dsp.cross_correlate(l_ir, r_ir, max_lag)) / energy
    peak = int(np.argmax(corr))
    lag = (dsp.parabolic_peak(corr, peak) if refine else float(peak)) - max_lag
    return float(min(corr[peak], 1.0)), lag / rate


def itd(brir: BinauralIr, segment_s: float | None = 2.5e-3) -> float:
    """Peak lag of the interaural cross-correlation, in microseconds.

    Searched over +/-1 ms with parabolic sub-sample refinement; positive
    when the left channel leads. By default the analysis covers the 2.5 ms
    direct-sound segment after onset; ``segment_s=None`` analyzes the whole
    BRIR instead.
    """
    if len(brir) <= int(2e-3 * brir.sample_rate):
        raise ValueError("BRIR must be longer than 2 ms")
    if segment_s is None:
        left, right = brir.left.samples, brir.right.samples
    else:
        start, stop = dsp.direct_segment(brir, segment_s)
        left = brir.left.samples[start:stop]
        right = brir.right.samples[start:stop]
    _, lag_s = _iacf_peak(left, right, brir.sample_rate, refine=True)
    return float(np.clip(lag_s * 1e6, -1000.0, 1000.0))


def iacc(left: MonoIr, right: MonoIr) -> float:
    """Maximum |normalized interaural cross-correlation| over +/-1 ms."""
    if left.sample_rate != right.sample_rate:
        raise ValueError("sample-rate mismatch")
    if len(left) != len(right):
        raise ValueError("segments must have equal length")
    if len(left) <= int(2e-3 * left.sample_rate):
        raise ValueError("segments must be longer than 2 ms")
    coeff, _ = _iacf_peak(left.samples, right.samples, left.sample_rate, refine=False)
    return coeff


def iacc_e3_l3(brir: BinauralIr, early_s: float = EARLY_WINDOW_S) -> tuple[float, float]:
    """(1 - IACC_E3, 1 - IACC_L3): octave-band-averaged early/late coherence.

    Early covers onset..onset+80 ms, late the remaining tail; the IACC of
    each window is averaged over the 500 Hz, 1 kHz, and 2 kHz octave bands.
    """
    onset = dsp.detect_onset(brir)
    rate = brir.sample_rate
    split = onset + int(round(early_s * rate))
    min_window = int(2e-3 * rate) + 1
    if split > len(brir):
        raise ValueError(
            f"BRIR too short for the early window: need {split} samples, have {len(brir)}"
        )
    if len(brir) - split < min_window:
        raise ValueError("late window shorter than 2 ms")

    early_vals, late_vals = [], []
    for band in IACC_BANDS_HZ:
        left = octave_filter(brir.left, band).samples
        right = octave_filter(brir.right, band).samples
        early_vals.append(
            iacc(MonoIr(left[onset:split], rate), MonoIr(right[onset:split], rate))
        )
        late_vals.append(
            iacc(MonoIr(left[split:], rate), MonoIr(right[split:], rate))
        )
    e3 = float(np.clip(1.0 - np.mean(early_vals), 0.0, 1.0))
    l3 = float(np.clip(1.0 - np.mean(late_vals), 0.0, 1.0))
    return e3, l3


def _t30_one_band(samples: np.ndarray, rate: float, band_hz: float) -> float:
    filtered = octave_filter(MonoIr(samples, rate), band_hz).samples
    energy = filtered**2
    onset = int(np.argmax(energy))
    edc = np.cumsum(energy[::-1])[::-1][onset:]
    if edc[0] <= 0.0:
        raise DegenerateInputError(f"no energy in the {band_hz:.0f} Hz band")
    # floor keeps a zero-energy tail (near-anechoic input) from putting
    # -inf into the fit region
    edc_db = 10.0 * np.log10(np.maximum(edc / edc[0], 1e-30))

    # Dynamic-range guard: the fit needs a genuine 35 dB decay, measured
    # away from the integration tail where truncation dominates.
    probe = min(edc_db.size - 1, int(0.9 * edc_db.size))
    measured_range = -float(edc_db[probe])
    if measured_range < 35.0:
        raise InsufficientDecayError(measured_range, 35.0)

    i5 = int(np.argmax(edc_db <= -5.0))
    i35 = int(np.argmax(edc_db <= -35.0))
    if i35 <= i5:
        raise InsufficientDecayError(measured_range, 35.0)
    t = np.arange(i5, i35 + 1) / rate
    slope, _ = np.polyfit(t, edc_db[i5 : i35 + 1], 1)
    if slope >= 0.0:
        raise InsufficientDecayError(measured_range, 35.0)
    return -60.0 / float(slope)


def t30_mid(ir: MonoIr | BinauralIr, bands_hz: tuple = T30_BANDS_HZ) -> float:
    """Reverberation time from a 30 dB Schroeder decay fit, extrapolated to
    60 dB and averaged over the 500 Hz and 1 kHz octave bands (and both
    channels for a BRIR).
    """
    if isinstance(ir, BinauralIr):
        channels = [ir.left.samples, ir.right.samples]
        rate = ir.sample_rate
    else:
        channels = [ir.samples]
        rate = ir.sample_rate
    values = [
        _t30_one_band(ch, rate, band) for ch in channels for band in bands_hz
    ]
    return float(np.mean(values))


def measure_brir(brir: BinauralIr) -> MetricReport:
    """Normalize a BRIR and compute the full metric set."""
    normalized = dsp.normalize_direct_energy(brir)
    low, high = ild_avg(normalized)
    e3, l3 = iacc_e3_l3(normalized)
    return MetricReport(
        ild_low_db=low,
        ild_high_db=high,
        itd_us=itd(normalized),
        t30_mid_s=t30_mid(normalized),
        one_minus_iacc_e3=e3,
        one_minus_iacc_l3=l3,
    )


def error_summary_paired(systems: list[MetricReport],
                         references: list[MetricReport]) -> ErrorSummary:
    """Pooled MAE/MSD over (system, reference) pairs, one pair per entry."""
    if not systems:
        raise ValueError("at least one system report required")
    if len(systems) != len(references):
        raise ValueError("need one reference per system entry")
    mae, msd, jnd_pass = {}, {}, {}
    for name in MetricReport.metric_names():
        diffs = np.array(
            [getattr(s, name) - getattr(r, name) for s, r in zip(systems, references)]
        )
        mae[name] = float(np.mean(np.abs(diffs)))
        msd[name] = float(np.mean(diffs))
        if name == "t30_mid_s":
            ref_mean = float(np.mean([getattr(r, name) for r in references]))
            threshold = JND[name] * ref_mean
        else:
            threshold = JND[name]
        jnd_pass[name] = bool(mae[name] <= threshold)
    return ErrorSummary(mae=mae, msd=msd, system_count=len(systems), jnd_pass=jnd_pass)


def error_summary(systems: list[MetricReport], reference: MetricReport) -> ErrorSummary:
    """MAE/MSD of each metric across systems, against one reference."""
    if not systems:
        raise ValueError("at least one system report required")
    return error_summary_paired(systems, [reference] * len(systems))
