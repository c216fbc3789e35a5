"""
Band-pass conditioning and cropped power spectrograms.

The band-pass filter is a linear-phase FIR designed by the window method with a
Dolph-Chebyshev window. The tap count and window sidelobe level are searched
until the measured response meets the requested stopband attenuation and
passband ripple on a dense frequency grid.

The spectrogram is one-sided with 1/nfft normalization: interior bins are
doubled so that, for one frame, the sum over all rfft bins equals the energy
of the windowed frame (Parseval).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio_io import SignalSlice

MAX_TAPS = 4001
RESPONSE_GRID = 8192


class InfeasibleFilterError(ValueError):
    pass


class RateMismatchError(ValueError):
    pass


class SliceTooShortError(ValueError):
    pass


class CropOutOfRangeError(ValueError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    pass_lo: float = 75.0
    pass_hi: float = 350.0
    stop_attenuation_db: float = 30.0
    transition_hz: float = 40.0
    passband_ripple_db: float = 0.1

    def validate(self, sample_rate: float) -> None:
        if not 0 < self.pass_lo < self.pass_hi < sample_rate / 2:
            raise ValueError(f"need 0 < pass_lo < pass_hi < {sample_rate / 2} Hz")
        if self.transition_hz <= 0:
            raise ValueError("transition_hz must be positive")
        if self.stop_attenuation_db < 0 or self.passband_ripple_db <= 0:
            raise ValueError("attenuation must be >= 0 and ripple > 0")


@dataclass(frozen=True)
class FilterKernel:
    taps: np.ndarray
    group_delay_samples: int
    spec: FilterSpec
    sample_rate: int
    window_attenuation_db: float


@dataclass(frozen=True)
class StftParams:
    nfft: int = 512
    hop_samples: int = 41
    window_kind: str = "blackman"

    def __post_init__(self):
        if self.nfft <= 0 or self.nfft & (self.nfft - 1):
            raise ValueError("nfft must be a power of two")
        if not 0 < self.hop_samples <= self.nfft:
            raise ValueError("need 0 < hop_samples <= nfft")


@dataclass(frozen=True)
class Spectrogram:
    """Power matrix with rows = time bins, columns = frequency bins."""
    power: np.ndarray
    time_bin_s: float
    freq_bin_hz: float
    f0_hz: float
    start_time: float
    frame_offset_s: float = 0.0  # centre of frame 0 relative to start_time

    @property
    def shape(self):
        return self.power.shape

    def frame_times(self) -> np.ndarray:
        n = self.power.shape[0]
        return self.start_time + self.frame_offset_s + np.arange(n) * self.time_bin_s

    def frequencies(self) -> np.ndarray:
        return self.f0_hz + np.arange(self.power.shape[1]) * self.freq_bin_hz


def _stop_and_pass_masks(freqs: np.ndarray, spec: FilterSpec):
    passband = (freqs >= spec.pass_lo) & (freqs <= spec.pass_hi)
    stopband = (freqs <= spec.pass_lo - spec.transition_hz) | (freqs >= spec.pass_hi + spec.transition_hz)
    return passband, stopband


def measure_response(taps: np.ndarray, spec: FilterSpec, sample_rate: float,
                     n_grid: int = RESPONSE_GRID) -> dict:
    """Worst-case passband deviation and stopband gain (dB) of ``taps`` on a dense grid."""
    freqs, h = signal.freqz(taps, worN=n_grid, fs=sample_rate)
    gain_db = 20 * np.log10(np.maximum(np.abs(h), 1e-300))
    passband, stopband = _stop_and_pass_masks(freqs, spec)
    return {
        "max_passband_deviation_db": float(np.max(np.abs(gain_db[passband]))),
        "passband_peak_to_peak_db": float(np.ptp(gain_db[passband])),
        "max_stopband_gain_db": float(np.max(gain_db[stopband])) if stopband.any() else -np.inf,
    }


def meets_spec(taps: np.ndarray, spec: FilterSpec, sample_rate: float,
               n_grid: int = RESPONSE_GRID) -> bool:
    r = measure_response(taps, spec, sample_rate, n_grid)
    return (r["max_passband_deviation_db"] <= spec.passband_ripple_db
            and r["max_stopband_gain_db"] <= -spec.stop_attenuation_db)


def design_bandpass(spec: FilterSpec, sample_rate: int) -> FilterKernel:
    """Design a linear-phase band-pass FIR meeting ``spec`` at ``sample_rate``.

    The band edges of the ideal response sit in the middle of each transition band.
    Passband ripple of r dB corresponds to a linear deviation of 10**(r/20) - 1, which
    for r = 0.1 dB is tighter (about -38.7 dB) than a 30 dB stopband, so the window
    sidelobe level starts from whichever requirement is stricter.
    """
    spec.validate(sample_rate)
    nyq = sample_rate / 2
    lo_edge = spec.pass_lo - spec.transition_hz / 2
    hi_edge = spec.pass_hi + spec.transition_hz / 2
    if lo_edge <= 0 or hi_edge >= nyq:
        raise InfeasibleFilterError("transition band crosses 0 Hz or Nyquist")

    ripple_db = -20 * np.log10(10 ** (spec.passband_ripple_db / 20) - 1)
    base_atten = max(spec.stop_attenuation_db, ripple_db)
    # Kaiser's tap estimate as a starting point
    dw = 2 * np.pi * spec.transition_hz / sample_rate
    n = int(np.ceil((base_atten - 8) / (2.285 * dw))) + 1
    n = max(n | 1, 3)
    while n <= MAX_TAPS:
        for extra in range(0, 45, 5):
            atten = base_atten + extra
            with warnings.catch_warnings():
                # chebwin warns about spectral-analysis use below 45 dB
                warnings.simplefilter("ignore", UserWarning)
                taps = signal.firwin(n, [lo_edge, hi_edge], window=("chebwin", atten),
                                     pass_zero=False, fs=sample_rate)
            if meets_spec(taps, spec, sample_rate):
                return FilterKernel(taps, (n - 1) // 2, spec, int(sample_rate), atten)
        n = (int(n * 1.05) + 2) | 1
    raise InfeasibleFilterError(
        f"no kernel within {MAX_TAPS} taps meets {spec} at {sample_rate} Hz")


def apply_filter(slc: SignalSlice, kernel: FilterKernel) -> SignalSlice:
    """Zero-phase-aligned filtering: full convolution trimmed by the group delay."""
    if slc.sample_rate != kernel.sample_rate:
        raise RateMismatchError(
            f"kernel designed for {kernel.sample_rate} Hz, slice is {slc.sample_rate} Hz")
    x = slc.samples
    if len(x) == 0:
        return slc
    y = signal.oaconvolve(x, kernel.taps, mode="full")
    gd = kernel.group_delay_samples
    return slc.with_samples(y[gd:gd + len(x)])


def analysis_window(kind: str, nfft: int) -> np.ndarray:
    if kind == "blackman":
        return np.blackman(nfft)
    return signal.get_window(kind, nfft, fftbins=False)


def compute_spectrogram(slc: SignalSlice, params: StftParams = StftParams(),
                        crop=(75.0, 350.0)) -> Spectrogram:
    """Cropped one-sided power spectrogram of ``slc``.

    Rows are frames of ``nfft`` samples advanced by ``hop_samples``; columns are
    rfft bins k with crop[0] <= k * fs / nfft <= crop[1].
    """
    fs = slc.sample_rate
    f_lo, f_hi = crop
    if not 0 <= f_lo < f_hi <= fs / 2:
        raise CropOutOfRangeError(f"crop {crop} outside [0, {fs / 2}] Hz")
    x = slc.samples
    nfft, hop = params.nfft, params.hop_samples
    if len(x) < nfft:
        raise SliceTooShortError(f"slice has {len(x)} samples, need {nfft}")
    df = fs / nfft
    k = np.arange(nfft // 2 + 1)
    keep = (k * df >= f_lo) & (k * df <= f_hi)
    if not keep.any():
        raise CropOutOfRangeError(f"crop {crop} contains no frequency bin")
    cols = k[keep]

    n_frames = (len(x) - nfft) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, nfft)[::hop][:n_frames]
    spectrum = np.fft.rfft(frames * analysis_window(params.window_kind, nfft), axis=1)
    power = np.abs(spectrum[:, cols]) ** 2 / nfft
    interior = (cols > 0) & (cols < nfft // 2)
    power[:, interior] *= 2.0
    return Spectrogram(power, hop / fs, df, float(cols[0] * df), slc.start_time,
                       frame_offset_s=(nfft / 2) / fs)
