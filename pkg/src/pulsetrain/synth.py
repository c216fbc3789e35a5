"""
Synthetic clips with pulse trains of known placement, for ground-truth testing.

Each pulse is a band-limited white-noise burst with 5 ms raised-cosine edges.
Pulse amplitudes are set so that the pulse Leq (over the pulse duration) sits
``snr_db`` above the Leq of the background noise measured inside the analysis
band. Everything is deterministic given ``SynthSpec.seed``.
"""

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from scipy import signal

from .audio_io import AudioStream, write_wav

EDGE_S = 0.005
MINKE_RATE_HZ = (2.8, 4.5)
MINKE_PULSE_S = (0.040, 0.060)
MINKE_TRAIN_S = (40.0, 60.0)

# 3-pole/3-zero approximation of a -3 dB/octave slope (valid well below Nyquist)
_PINK_B = np.array([0.049922035, -0.095993537, 0.050612699, -0.004408786])
_PINK_A = np.array([1.0, -2.494956002, 2.017265875, -0.522189400])


class SynthSpecError(ValueError):
    pass


class OverlappingTrainsError(SynthSpecError):
    pass


@dataclass
class TrainSpec:
    start_s: float
    pulse_rate_hz: float
    n_pulses: int
    pulse_dur_s: float = 0.05
    band: Tuple[float, float] = (100.0, 300.0)
    snr_db: float = 15.0
    rate_jitter_pct: float = 0.0
    label: str = "minke"

    def max_span_s(self) -> float:
        period = 1.0 / self.pulse_rate_hz
        return (self.n_pulses - 1) * period * (1 + self.rate_jitter_pct / 100) + self.pulse_dur_s


@dataclass
class ToneSpec:
    freq_hz: float
    level_db: float  # relative to the in-band noise Leq


@dataclass
class SynthSpec:
    sample_rate: int = 2000
    duration_s: float = 60.0
    trains: List[TrainSpec] = field(default_factory=list)
    noise_kind: str = "white"
    noise_variance: float = 4e-4
    tones: List[ToneSpec] = field(default_factory=list)
    seed: int = 0
    analysis_band: Tuple[float, float] = (75.0, 350.0)

    def validate(self) -> None:
        if self.sample_rate <= 0 or self.duration_s <= 0:
            raise SynthSpecError("sample_rate and duration_s must be positive")
        if self.noise_kind not in ("white", "pink"):
            raise SynthSpecError(f"unknown noise kind {self.noise_kind!r}")
        nyq = self.sample_rate / 2
        spans = []
        for tr in self.trains:
            if not 0 < tr.pulse_rate_hz < nyq:
                raise SynthSpecError("pulse_rate_hz out of range")
            if tr.n_pulses < 1 or tr.pulse_dur_s <= 2 * EDGE_S:
                raise SynthSpecError("need n_pulses >= 1 and pulse_dur_s > 10 ms")
            if not 0 < tr.band[0] < tr.band[1] < nyq:
                raise SynthSpecError(f"bad pulse band {tr.band}")
            if not np.isfinite(tr.snr_db):
                raise SynthSpecError("snr_db must be finite")
            if not 0 <= tr.rate_jitter_pct < 100:
                raise SynthSpecError("rate_jitter_pct must be in [0, 100)")
            end = tr.start_s + tr.max_span_s()
            if tr.start_s < 0 or end > self.duration_s:
                raise SynthSpecError(f"train at {tr.start_s} s does not fit in {self.duration_s} s")
            spans.append((tr.start_s, end))
        spans.sort()
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            if b0 < a1:
                raise OverlappingTrainsError(f"trains [{a0}, {a1}] and [{b0}, {b1}] overlap")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        d["trains"] = [TrainSpec(**{**t, "band": tuple(t.get("band", (100.0, 300.0)))})
                       for t in d.get("trains", [])]
        d["tones"] = [ToneSpec(**t) for t in d.get("tones", [])]
        if "analysis_band" in d:
            d["analysis_band"] = tuple(d["analysis_band"])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TruthInterval:
    start_s: float
    end_s: float
    label: str
    pulse_times: List[float]


@dataclass
class GroundTruth:
    intervals: List[TruthInterval]
    rescaled: bool = False  # True when the clip was scaled down to avoid clipping
    gain: float = 1.0


def band_limit(x: np.ndarray, sample_rate: float, band) -> np.ndarray:
    """Brick-wall band-pass via the real FFT."""
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(len(x), 1.0 / sample_rate)
    spec[(f < band[0]) | (f > band[1])] = 0
    return np.fft.irfft(spec, n=len(x))


def _leq(x: np.ndarray) -> float:
    return 10 * np.log10(max(float(np.mean(x ** 2)), 1e-30))


def _pulse(rng: np.random.Generator, n: int, sample_rate: int, band) -> np.ndarray:
    pad = n
    burst = band_limit(rng.standard_normal(n + 2 * pad), sample_rate, band)[pad:pad + n]
    n_edge = max(1, int(round(EDGE_S * sample_rate)))
    ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(n_edge) + 0.5) / n_edge)
    burst[:n_edge] *= ramp
    burst[-n_edge:] *= ramp[::-1]
    return burst / np.sqrt(np.mean(burst ** 2))


def _noise(rng: np.random.Generator, spec: SynthSpec, n: int) -> np.ndarray:
    w = rng.standard_normal(n)
    if spec.noise_kind == "pink":
        w = signal.lfilter(_PINK_B, _PINK_A, w)
        w /= np.std(w)
    return w * np.sqrt(spec.noise_variance)


def generate_clip(spec: SynthSpec):
    """Render ``spec`` to (AudioStream, GroundTruth).

    Raises OverlappingTrainsError / SynthSpecError for invalid specs. When the
    rendered clip would clip, it is scaled down as a whole and
    ``GroundTruth.rescaled`` is set.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    fs = spec.sample_rate
    n = int(round(spec.duration_s * fs))
    noise = _noise(rng, spec, n)
    noise_db = _leq(band_limit(noise, fs, spec.analysis_band))
    x = noise.copy()

    for tone in spec.tones:
        amp = np.sqrt(2) * 10 ** ((noise_db + tone.level_db) / 20)
        phase = rng.uniform(0, 2 * np.pi)
        x += amp * np.sin(2 * np.pi * tone.freq_hz * np.arange(n) / fs + phase)

    intervals = []
    for tr in sorted(spec.trains, key=lambda t: t.start_s):
        period = 1.0 / tr.pulse_rate_hz
        jitter = tr.rate_jitter_pct / 100
        gaps = period * (1 + rng.uniform(-jitter, jitter, tr.n_pulses - 1))
        onsets = tr.start_s + np.concatenate([[0.0], np.cumsum(gaps)])
        n_pulse = int(round(tr.pulse_dur_s * fs))
        amp = 10 ** ((noise_db + tr.snr_db) / 20)
        centers = []
        for t0 in onsets:
            i0 = int(round(t0 * fs))
            p = amp * _pulse(rng, n_pulse, fs, tr.band)
            seg = x[i0:i0 + n_pulse]
            seg += p[:len(seg)]
            centers.append((i0 + n_pulse / 2) / fs)
        end = (int(round(onsets[-1] * fs)) + n_pulse) / fs
        intervals.append(TruthInterval(float(onsets[0]), float(end), tr.label,
                                       [float(c) for c in centers]))

    gain = 1.0
    peak = float(np.max(np.abs(x))) if n else 0.0
    if peak > 1.0:
        gain = 0.999 / peak
        x *= gain
    # float32-representable so a float WAV round trip is exact
    x = x.astype(np.float32).astype(np.float64)
    return AudioStream(x, fs, 0, f"synth:{spec.seed}"), GroundTruth(intervals, gain != 1.0, gain)


def minke_preset(seed: int, snr_db: float = 15.0, train_s=MINKE_TRAIN_S,
                 margin_s: float = 10.0, noise_kind: str = "white") -> SynthSpec:
    """One pulse train with rate, pulse length and train length drawn from the
    species ranges (2.8-4.5 pulses/s, 40-60 ms pulses, 40-60 s trains)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x4D4B]))
    rate = rng.uniform(*MINKE_RATE_HZ)
    dur = rng.uniform(*MINKE_PULSE_S)
    length = rng.uniform(*train_s)
    n_pulses = int(length * rate) + 1
    band = (rng.uniform(80, 120), rng.uniform(280, 340))
    start = rng.uniform(margin_s / 2, margin_s)
    tr = TrainSpec(round(start, 3), rate, n_pulses, dur, band, snr_db, 5.0, "minke")
    duration = np.ceil(start + tr.max_span_s() + margin_s)
    return SynthSpec(2000, float(duration), [tr], noise_kind, seed=seed)


def distractor_preset(seed: int, snr_db: float = 15.0, train_s=(20.0, 40.0),
                      margin_s: float = 10.0, noise_kind: str = "white") -> SynthSpec:
    """Non-target pulse train: shorter, lower and narrower-band knocks with irregular
    timing (15 % jitter) over constant narrowband tones in the 70-200 Hz region.
    Band edges overlap the minke preset's, so frequency alone does not separate them."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x4E4D]))
    rate = rng.uniform(*MINKE_RATE_HZ)
    dur = rng.uniform(0.015, 0.045)
    length = rng.uniform(*train_s)
    n_pulses = int(length * rate) + 1
    lo = rng.uniform(75, 110)
    band = (lo, lo + rng.uniform(60, 170))
    start = rng.uniform(margin_s / 2, margin_s)
    tr = TrainSpec(round(start, 3), rate, n_pulses, dur, band, snr_db, 15.0, "non-minke")
    tones = [ToneSpec(float(rng.uniform(70, 200)), float(rng.uniform(0, 10)))
             for _ in range(int(rng.integers(1, 3)))]
    duration = np.ceil(start + tr.max_span_s() + margin_s)
    return SynthSpec(2000, float(duration), [tr], noise_kind, tones=tones, seed=seed)


def noise_preset(seed: int, duration_s: float = 3600.0, noise_kind: str = "white") -> SynthSpec:
    return SynthSpec(2000, duration_s, [], noise_kind, seed=seed)


def write_truth_csv(path, truth: GroundTruth, source: str = "") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "start_s", "end_s", "label", "n_pulses"])
        for iv in truth.intervals:
            w.writerow([source, f"{iv.start_s:.6f}", f"{iv.end_s:.6f}", iv.label, len(iv.pulse_times)])


def write_clip(out_dir, name: str, stream: AudioStream, truth: GroundTruth) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wav = out_dir / f"{name}.wav"
    truth_csv = out_dir / f"{name}.truth.csv"
    write_wav(wav, stream.samples, stream.sample_rate, "float32")
    write_truth_csv(truth_csv, truth, wav.name)
    return wav, truth_csv
