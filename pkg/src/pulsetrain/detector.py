"""
Energy projection of binary spectrogram images and pulse-train rules.

energy_projection(): count white pixels per time bin.
find_local_maxima(): supra-threshold local maxima of a projection (plateau -> first index).
apply_pulse_train_rules(): count and inter-pulse-interval rules on one slice's peaks.
detect_slice(): the full chain from raw slice to at most one PulseTrainEvent.
merge_overlapping_events(): join events reported by overlapping slices.
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from .audio_io import SignalSlice
from .binarize import BinaryImage, MaskLevel, binarize
from .dsp import FilterKernel, FilterSpec, StftParams, apply_filter, compute_spectrogram, design_bandpass

TOO_FEW = "too-few"
TOO_MANY = "too-many"
IPI_NONCONFORMING = "ipi-nonconforming"
ACCEPTED = "accepted"


@dataclass(frozen=True)
class EnergyProjection:
    values: np.ndarray
    time_bin_s: float
    start_time: float
    frame_offset_s: float = 0.0

    def times(self) -> np.ndarray:
        return self.start_time + self.frame_offset_s + np.arange(len(self.values)) * self.time_bin_s


@dataclass(frozen=True)
class PeakList:
    indices: np.ndarray
    heights: np.ndarray
    threshold: float


@dataclass(frozen=True)
class PulseRules:
    threshold: float = 6
    min_peaks: int = 8
    max_peaks: int = 135
    ipi_lo: float = 1 / 4.5
    ipi_hi: float = 1 / 2.8
    ipi_conformity: float = 0.6

    def __post_init__(self):
        if not 0 < self.ipi_lo < self.ipi_hi:
            raise ValueError("need 0 < ipi_lo < ipi_hi")
        if not 0 < self.min_peaks <= self.max_peaks:
            raise ValueError("need 0 < min_peaks <= max_peaks")
        if not 0 < self.ipi_conformity <= 1:
            raise ValueError("ipi_conformity must be in (0, 1]")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")


@dataclass
class PulseTrainEvent:
    start_time: float
    end_time: float
    peak_times: np.ndarray
    peak_heights: np.ndarray
    f_lo: float
    f_hi: float
    slice_id: str = ""
    source_path: str = ""
    score: Optional[float] = None
    n_slices: int = 1
    time_bin_s: float = 0.0205

    @property
    def n_peaks(self) -> int:
        return len(self.peak_times)


@dataclass(frozen=True)
class RuleDecision:
    accepted: bool
    reason: str
    n_peaks: int
    conformity: float
    event: Optional[PulseTrainEvent] = None


@dataclass(frozen=True)
class DetectorConfig:
    filter: FilterSpec = FilterSpec()
    stft: StftParams = StftParams()
    crop: Tuple[float, float] = (75.0, 350.0)
    gamma_coefficient: float = 1.75
    dyn_range_db: float = 60.0
    rules: PulseRules = PulseRules()


@dataclass
class SliceResult:
    """Everything detect_slice produced for one slice; ``events`` has 0 or 1 entries."""
    events: List[PulseTrainEvent]
    decision: RuleDecision
    filtered: SignalSlice
    binary: BinaryImage
    level: MaskLevel
    projection: EnergyProjection
    peaks: PeakList


def energy_projection(bw: BinaryImage) -> EnergyProjection:
    bits = np.asarray(bw.bits)
    if bits.size == 0:
        raise ValueError("empty binary image")
    values = bits.sum(axis=1, dtype=np.int64)
    return EnergyProjection(values, bw.time_bin_s, bw.start_time, bw.frame_offset_s)


def find_local_maxima(p: EnergyProjection, threshold: float) -> PeakList:
    """Indices of local maxima with value > threshold.

    A run of equal values is one candidate, reported at its first index; it is a
    peak when the values on both sides of the run (where they exist) are lower.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    v = np.asarray(p.values)
    n = len(v)
    idx = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and v[j + 1] == v[i]:
            j += 1
        if v[i] > threshold:
            left_ok = i == 0 or v[i - 1] < v[i]
            right_ok = j == n - 1 or v[j + 1] < v[i]
            if left_ok and right_ok:
                idx.append(i)
        i = j + 1
    idx = np.asarray(idx, dtype=np.int64)
    return PeakList(idx, v[idx] if n else np.zeros(0, dtype=v.dtype), threshold)


def ipi_conformity(peak_times: np.ndarray, rules: PulseRules, time_bin_s: float) -> float:
    gaps = np.diff(peak_times)
    if len(gaps) == 0:
        return 0.0
    ok = (gaps >= rules.ipi_lo - time_bin_s) & (gaps <= rules.ipi_hi + time_bin_s)
    return float(np.mean(ok))


def apply_pulse_train_rules(peaks: PeakList, rules: PulseRules, time_bin_s: float,
                            start_time: float, frame_offset_s: float = 0.0,
                            crop=(75.0, 350.0), slice_id: str = "",
                            source_path: str = "") -> RuleDecision:
    count = len(peaks.indices)
    if count < rules.min_peaks:
        return RuleDecision(False, TOO_FEW, count, 0.0)
    if count > rules.max_peaks:
        return RuleDecision(False, TOO_MANY, count, 0.0)
    times = start_time + frame_offset_s + peaks.indices * time_bin_s
    frac = ipi_conformity(times, rules, time_bin_s)
    if frac < rules.ipi_conformity:
        return RuleDecision(False, IPI_NONCONFORMING, count, frac)
    event = PulseTrainEvent(float(times[0]), float(times[-1]), times,
                            np.asarray(peaks.heights), float(crop[0]), float(crop[1]),
                            slice_id, source_path, time_bin_s=time_bin_s)
    return RuleDecision(True, ACCEPTED, count, frac, event)


_KERNELS = {}


def kernel_for(spec: FilterSpec, sample_rate: int) -> FilterKernel:
    key = (spec, int(sample_rate))
    if key not in _KERNELS:
        _KERNELS[key] = design_bandpass(spec, sample_rate)
    return _KERNELS[key]


def analyze_slice(slc: SignalSlice, cfg: DetectorConfig = DetectorConfig()) -> SliceResult:
    """filter -> spectrogram/crop -> intensity -> mask -> projection -> peaks -> rules."""
    filtered = apply_filter(slc, kernel_for(cfg.filter, slc.sample_rate))
    spec = compute_spectrogram(filtered, cfg.stft, cfg.crop)
    bw, level = binarize(spec, cfg.gamma_coefficient, cfg.dyn_range_db)
    proj = energy_projection(bw)
    peaks = find_local_maxima(proj, cfg.rules.threshold)
    decision = apply_pulse_train_rules(peaks, cfg.rules, bw.time_bin_s, bw.start_time,
                                       bw.frame_offset_s, cfg.crop, slc.slice_id,
                                       slc.source_path)
    events = [decision.event] if decision.accepted else []
    return SliceResult(events, decision, filtered, bw, level, proj, peaks)


def detect_slice(slc: SignalSlice, cfg: DetectorConfig = DetectorConfig()) -> List[PulseTrainEvent]:
    return analyze_slice(slc, cfg).events


def merge_groups(events: List[PulseTrainEvent], min_overlap: float = 0.5,
                 edge_allowance_s: float = 0.0) -> List[List[int]]:
    """Indices of ``events`` grouped the way merge_overlapping_events joins them."""
    order = sorted(range(len(events)), key=lambda i: (events[i].start_time, events[i].slice_id))
    groups: List[List[int]] = []
    span = None
    for i in order:
        ev = events[i]
        if span is not None:
            shorter = min(span[1] - span[0], ev.end_time - ev.start_time)
            ov = min(span[1], ev.end_time) - max(span[0], ev.start_time)
            if ov >= 0 and ov + edge_allowance_s >= min_overlap * shorter:
                groups[-1].append(i)
                span = (min(span[0], ev.start_time), max(span[1], ev.end_time))
                continue
        groups.append([i])
        span = (ev.start_time, ev.end_time)
    return groups


def merge_overlapping_events(events: List[PulseTrainEvent], min_overlap: float = 0.5,
                             edge_allowance_s: float = 0.0,
                             dedup_s: Optional[float] = None) -> List[PulseTrainEvent]:
    """Merge events whose spans overlap by at least ``min_overlap`` of the shorter span.

    Events are taken in start-time order and each is compared with the running
    merged span. ``edge_allowance_s`` is added to the measured overlap; pass the
    analysis frame length so events cut at slice borders (which cannot have peaks
    within half a frame of either edge) still merge. Merged peak times closer than
    ``dedup_s`` (default half a time bin) count as the same pulse; the taller one
    is kept.
    """
    merged = []
    for group in merge_groups(events, min_overlap, edge_allowance_s):
        ev = replace(events[group[0]])
        for i in group[1:]:
            ev = _union(ev, events[i], dedup_s)
        merged.append(ev)
    return merged


def _union(a: PulseTrainEvent, b: PulseTrainEvent, dedup_s: Optional[float]) -> PulseTrainEvent:
    times = np.concatenate([a.peak_times, b.peak_times])
    heights = np.concatenate([a.peak_heights, b.peak_heights])
    order = np.argsort(times, kind="stable")
    times, heights = times[order], heights[order]
    if dedup_s is None:
        dedup_s = 0.5 * min(a.time_bin_s, b.time_bin_s)
    keep = [0]
    for i in range(1, len(times)):
        if times[i] - times[keep[-1]] > dedup_s:
            keep.append(i)
        elif heights[i] > heights[keep[-1]]:
            keep[-1] = i
    keep = np.asarray(keep)
    return PulseTrainEvent(min(a.start_time, b.start_time), max(a.end_time, b.end_time),
                           times[keep], heights[keep], min(a.f_lo, b.f_lo), max(a.f_hi, b.f_hi),
                           a.slice_id, a.source_path, a.score, a.n_slices + b.n_slices,
                           min(a.time_bin_s, b.time_bin_s))
