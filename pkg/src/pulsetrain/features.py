"""
The 18 per-event features used for classification.

Each detected pulse is given a fixed 50 ms extent centred on its peak time.
Frequency features come from white pixels of the binary image in the time
bins that fall inside a pulse extent; level features come from the filtered
samples inside the extents; SNR features compare the mean pulse Leq with a
noise level estimated from the same slice.
"""

from dataclasses import astuple, dataclass, fields
from typing import Optional

import numpy as np

from .audio_io import SignalSlice
from .binarize import BinaryImage
from .detector import PulseTrainEvent

LEQ_FLOOR_DB = -120.0
PULSE_EXTENT_S = 0.050
SNR_PERCENTILES = (5, 10, 20, 25)

FEATURE_NAMES = (
    "f1_delta_time_s",
    "f2_freq_min_hz",
    "f3_freq_max_hz",
    "f4_num_clicks",
    "f5_avg_bandwidth_hz",
    "f6_center_freq_hz",
    "f7_avg_sharpness_per_s",
    "f8_cec_db",
    "f9_mean_leq_db",
    "f10_ipi_mean_s",
    "f11_ipi_mode_s",
    "f12_ipi_max_s",
    "f13_ipi_min_s",
    "f14_snr_db",
    "f15_snr_p05_db",
    "f16_snr_p10_db",
    "f17_snr_p20_db",
    "f18_snr_p25_db",
)

LABELS = ("minke", "non-minke", "unlabeled")


class DegenerateEventError(ValueError):
    pass


@dataclass
class FeatureVector:
    f1_delta_time_s: float
    f2_freq_min_hz: float
    f3_freq_max_hz: float
    f4_num_clicks: float
    f5_avg_bandwidth_hz: float
    f6_center_freq_hz: float
    f7_avg_sharpness_per_s: float
    f8_cec_db: float
    f9_mean_leq_db: float
    f10_ipi_mean_s: float
    f11_ipi_mode_s: float
    f12_ipi_max_s: float
    f13_ipi_min_s: float
    f14_snr_db: float
    f15_snr_p05_db: float
    f16_snr_p10_db: float
    f17_snr_p20_db: float
    f18_snr_p25_db: float
    label: str = "unlabeled"

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self)[:len(FEATURE_NAMES)], dtype=np.float64)

    @classmethod
    def from_array(cls, values, label: str = "unlabeled") -> "FeatureVector":
        values = [float(v) for v in values]
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(values)}")
        return cls(*values, label=label)


assert tuple(f.name for f in fields(FeatureVector))[:18] == FEATURE_NAMES


def leq_db(samples) -> float:
    """Equivalent level 10*log10(mean(x**2)), floored at -120 dB."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty segment")
    ms = float(np.mean(x * x))
    if ms <= 0:
        return LEQ_FLOOR_DB
    return max(10 * np.log10(ms), LEQ_FLOOR_DB)


def _nearest_rank(sorted_values: np.ndarray, percentile: float) -> float:
    n = len(sorted_values)
    rank = int(np.ceil(percentile / 100 * n))
    return float(sorted_values[min(max(rank, 1), n) - 1])


def time_bin_rms(slc: SignalSlice, bin_samples: int) -> np.ndarray:
    """RMS of consecutive non-overlapping blocks of ``bin_samples`` samples."""
    x = slc.samples
    n_bins = len(x) // bin_samples
    if n_bins == 0:
        return np.array([np.sqrt(np.mean(x * x))]) if len(x) else np.zeros(1)
    blocks = x[:n_bins * bin_samples].reshape(n_bins, bin_samples)
    return np.sqrt(np.mean(blocks * blocks, axis=1))


def _pulse_bounds(event: PulseTrainEvent, slc: SignalSlice, extent_s: float):
    fs = slc.sample_rate
    half = int(round(extent_s * fs / 2))
    centres = np.round((np.asarray(event.peak_times) - slc.start_time) * fs).astype(np.int64)
    lo = np.clip(centres - half, 0, len(slc.samples))
    hi = np.clip(centres + half, 0, len(slc.samples))
    return lo, hi


def pulse_leqs(event: PulseTrainEvent, slc: SignalSlice, extent_s: float = PULSE_EXTENT_S) -> np.ndarray:
    lo, hi = _pulse_bounds(event, slc, extent_s)
    return np.array([leq_db(slc.samples[a:b]) if b > a else LEQ_FLOOR_DB for a, b in zip(lo, hi)])


def snr_percentile_db(event: PulseTrainEvent, slc: SignalSlice, percentile: float,
                      bin_samples: Optional[int] = None,
                      extent_s: float = PULSE_EXTENT_S) -> float:
    """Mean pulse Leq minus the level of the time bin at ``percentile`` of the slice."""
    if not 0 < percentile < 100:
        raise ValueError("percentile must be in (0, 100)")
    if bin_samples is None:
        bin_samples = max(1, int(round(event.time_bin_s * slc.sample_rate)))
    signal_db = float(np.mean(pulse_leqs(event, slc, extent_s)))
    rms = np.sort(time_bin_rms(slc, bin_samples))
    noise_rms = _nearest_rank(rms, percentile)
    noise_db = LEQ_FLOOR_DB if noise_rms <= 0 else max(20 * np.log10(noise_rms), LEQ_FLOOR_DB)
    return signal_db - noise_db


def _ipi_mode(gaps: np.ndarray, time_bin_s: float) -> float:
    """Most common gap after snapping to the time-bin grid; ties go to the smallest.

    Returns an actual gap value from the most common grid cell so it stays
    within [min gap, max gap].
    """
    cells = np.round(gaps / time_bin_s).astype(np.int64)
    values, counts = np.unique(cells, return_counts=True)
    best = values[np.argmax(counts)]  # np.unique sorts, argmax takes the first max
    return float(np.min(gaps[cells == best]))


def extract_features(event: PulseTrainEvent, slc: SignalSlice, bw: BinaryImage,
                     extent_s: float = PULSE_EXTENT_S, label: str = "unlabeled") -> FeatureVector:
    """Compute the 18 features of ``event`` from its filtered slice and binary image."""
    times = np.asarray(event.peak_times, dtype=np.float64)
    if len(times) < 2:
        raise DegenerateEventError("need at least two peaks")
    n_pulses = len(times)
    f1 = float(times[-1] - times[0])
    if f1 <= 0:
        raise DegenerateEventError("zero-length event")
    f4 = float(n_pulses)
    f7 = f4 / f1

    # frequency extent of white pixels in each pulse's time bins
    frame_times = bw.frame_times()
    freqs = bw.frequencies()
    lows, highs = [], []
    for t in times:
        cols = np.abs(frame_times - t) <= extent_s / 2
        rows = np.flatnonzero(bw.bits[cols].any(axis=0)) if cols.any() else []
        if len(rows):
            lows.append(freqs[rows[0]])
            highs.append(freqs[rows[-1]])
    if lows:
        f2, f3 = float(min(lows)), float(max(highs))
        f5 = float(np.mean(np.subtract(highs, lows)))
    else:
        f2, f3, f5 = float(event.f_lo), float(event.f_hi), 0.0
    f6 = (f2 + f3) / 2

    leqs = pulse_leqs(event, slc, extent_s)
    lo, hi = _pulse_bounds(event, slc, extent_s)
    x = slc.samples
    energy = sum(float(np.mean(x[a:b] ** 2)) for a, b in zip(lo, hi) if b > a)
    f8 = max(10 * np.log10(energy), LEQ_FLOOR_DB) if energy > 0 else LEQ_FLOOR_DB
    f9 = float(np.mean(leqs))

    gaps = np.diff(times)
    f12, f13 = float(gaps.max()), float(gaps.min())
    f10 = float(np.clip(np.mean(gaps), f13, f12))
    f11 = _ipi_mode(gaps, event.time_bin_s)

    # in-span noise: everything between the first and last pulse that is not a pulse
    inside = np.zeros(len(x), dtype=bool)
    inside[lo[0]:hi[-1]] = True
    for a, b in zip(lo, hi):
        inside[a:b] = False
    if not inside.any():
        inside[:] = True
        for a, b in zip(lo, hi):
            inside[a:b] = False
    f14 = f9 - leq_db(x[inside]) if inside.any() else 0.0

    snr_p = [snr_percentile_db(event, slc, p, extent_s=extent_s) for p in SNR_PERCENTILES]

    return FeatureVector(f1, f2, f3, f4, f5, f6, f7, float(f8), f9, f10, f11, f12, f13,
                         float(f14), *snr_p, label=label)
