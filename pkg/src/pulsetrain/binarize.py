"""
Gray-scale conversion and statistical binarization of spectrograms.

The threshold for each image is gamma = coefficient * sigma + mu, where mu is
the mean pixel intensity and sigma the (population) standard deviation of the
zero-mean image. Pixels strictly brighter than gamma become 1.
"""

from dataclasses import dataclass

import numpy as np

from .dsp import Spectrogram

DEFAULT_GAMMA_COEFFICIENT = 1.75
DEFAULT_DYN_RANGE_DB = 60.0


class ShapeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class IntensityImage:
    pixels: np.ndarray
    time_bin_s: float
    freq_bin_hz: float
    f0_hz: float
    start_time: float
    frame_offset_s: float = 0.0


@dataclass(frozen=True)
class MaskLevel:
    gamma: float
    mu: float
    sigma: float
    coefficient: float = DEFAULT_GAMMA_COEFFICIENT
    shape: tuple = ()  # shape of the image the level was computed on


@dataclass(frozen=True)
class BinaryImage:
    bits: np.ndarray
    time_bin_s: float
    freq_bin_hz: float
    f0_hz: float
    start_time: float
    frame_offset_s: float = 0.0

    def frame_times(self) -> np.ndarray:
        n = self.bits.shape[0]
        return self.start_time + self.frame_offset_s + np.arange(n) * self.time_bin_s

    def frequencies(self) -> np.ndarray:
        return self.f0_hz + np.arange(self.bits.shape[1]) * self.freq_bin_hz


def to_intensity_image(spec: Spectrogram, dyn_range_db: float = DEFAULT_DYN_RANGE_DB) -> IntensityImage:
    """Map power to dB, floor at (max - dyn_range_db), then min-max scale to [0, 1].

    Zero power maps to the floor. A constant (or all-zero) image maps to zeros.
    """
    if dyn_range_db <= 0:
        raise ValueError("dyn_range_db must be positive")
    power = np.asarray(spec.power, dtype=np.float64)
    if power.size == 0:
        raise ValueError("empty spectrogram")
    peak = power.max()
    if peak <= 0:
        pixels = np.zeros_like(power)
    else:
        floor_db = 10 * np.log10(peak) - dyn_range_db
        db = np.full_like(power, floor_db)
        positive = power > 0
        db[positive] = np.maximum(10 * np.log10(power[positive]), floor_db)
        lo, hi = db.min(), db.max()
        if hi > lo:
            pixels = (db - lo) / (hi - lo)
        else:
            pixels = np.zeros_like(power)
    return IntensityImage(pixels, spec.time_bin_s, spec.freq_bin_hz, spec.f0_hz,
                          spec.start_time, spec.frame_offset_s)


def compute_mask_level(img: IntensityImage, coefficient: float = DEFAULT_GAMMA_COEFFICIENT) -> MaskLevel:
    px = img.pixels
    if px.size == 0:
        raise ValueError("empty image")
    mu = float(px.mean())
    sigma = float(np.sqrt(np.mean((px - mu) ** 2)))
    return MaskLevel(coefficient * sigma + mu, mu, sigma, coefficient, px.shape)


def apply_mask(img: IntensityImage, level: MaskLevel) -> BinaryImage:
    """Binarize with a strict ``pixel > gamma`` test."""
    if level.shape and tuple(level.shape) != img.pixels.shape:
        raise ShapeMismatchError(f"level computed on {level.shape}, image is {img.pixels.shape}")
    bits = (img.pixels > level.gamma).astype(np.uint8)
    return BinaryImage(bits, img.time_bin_s, img.freq_bin_hz, img.f0_hz, img.start_time,
                       img.frame_offset_s)


def binarize(spec: Spectrogram, coefficient: float = DEFAULT_GAMMA_COEFFICIENT,
             dyn_range_db: float = DEFAULT_DYN_RANGE_DB):
    """Spectrogram -> (BinaryImage, MaskLevel)."""
    img = to_intensity_image(spec, dyn_range_db)
    level = compute_mask_level(img, coefficient)
    return apply_mask(img, level), level
