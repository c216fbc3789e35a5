"""
Reading RIFF/WAVE files and cutting them into analysis windows.

open_audio(): decode one channel of a PCM/float WAV file into a normalized AudioStream.
slice_windows(): cut a stream into fixed-duration overlapping SignalSlices.
iter_file_slices(): same slicing, reading each window from a memory map instead of
    decoding the whole file first.
write_wav(): write a float stream to disk (float32 by default).
"""

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from scipy.io import wavfile


class AudioError(Exception):
    """Base class for decoding problems."""


class UnsupportedFormatError(AudioError):
    pass


class CorruptHeaderError(AudioError):
    pass


class ChannelOutOfRangeError(AudioError):
    pass


class EmptyStreamError(AudioError):
    pass


WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioStream:
    samples: np.ndarray
    sample_rate: int
    channel_index: int = 0
    source_path: str = ""
    start_epoch: Optional[float] = None

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class SignalSlice:
    samples: np.ndarray
    sample_rate: int
    start_time: float
    duration: float
    slice_id: str = ""
    source_path: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def with_samples(self, samples: np.ndarray) -> "SignalSlice":
        return SignalSlice(samples, self.sample_rate, self.start_time, self.duration,
                           self.slice_id, self.source_path)


@dataclass(frozen=True)
class _WavLayout:
    format_tag: int
    n_channels: int
    sample_rate: int
    bits: int
    data_offset: int
    n_frames: int


def _read_layout(path) -> _WavLayout:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            raise CorruptHeaderError(f"{path}: not a RIFF/WAVE file")
        fmt = None
        while True:
            chunk = fh.read(8)
            if len(chunk) < 8:
                break
            cid, size = struct.unpack("<4sI", chunk)
            if cid == b"fmt ":
                body = fh.read(size)
                if len(body) < 16:
                    raise CorruptHeaderError(f"{path}: truncated fmt chunk")
                tag, nch, rate, _, align, bits = struct.unpack("<HHIIHH", body[:16])
                if tag == WAVE_FORMAT_EXTENSIBLE:
                    if len(body) < 40:
                        raise CorruptHeaderError(f"{path}: truncated extensible fmt chunk")
                    # first two bytes of the subformat GUID carry the real tag
                    tag = struct.unpack("<H", body[24:26])[0]
                fmt = (tag, nch, rate, bits, align)
            elif cid == b"data":
                if fmt is None:
                    raise CorruptHeaderError(f"{path}: data chunk before fmt chunk")
                tag, nch, rate, bits, align = fmt
                if tag not in (WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT):
                    raise UnsupportedFormatError(f"{path}: format tag 0x{tag:04x} is not PCM/float")
                if tag == WAVE_FORMAT_PCM and bits not in (8, 16, 24, 32):
                    raise UnsupportedFormatError(f"{path}: {bits}-bit integer PCM")
                if tag == WAVE_FORMAT_IEEE_FLOAT and bits != 32:
                    raise UnsupportedFormatError(f"{path}: {bits}-bit float")
                if nch < 1 or rate < 1 or align != nch * bits // 8:
                    raise CorruptHeaderError(f"{path}: inconsistent fmt chunk")
                offset = fh.tell()
                available = Path(path).stat().st_size - offset
                n_bytes = min(size, max(available, 0))
                return _WavLayout(tag, nch, rate, bits, offset, n_bytes // align)
            else:
                fh.seek(size + (size & 1), 1)
        raise CorruptHeaderError(f"{path}: no fmt/data chunk")


def _normalize(raw: np.ndarray, layout: _WavLayout) -> np.ndarray:
    """Convert raw frames (n_frames x bytes-per-sample) of one channel to float64 in [-1, 1]."""
    bits = layout.bits
    if layout.format_tag == WAVE_FORMAT_IEEE_FLOAT:
        x = raw.view("<f4").reshape(-1).astype(np.float64)
        if not np.all(np.isfinite(x)):
            raise CorruptHeaderError("non-finite float samples")
        return np.clip(x, -1.0, 1.0)
    if bits == 8:
        return (raw.reshape(-1).astype(np.float64) - 128.0) / 128.0
    if bits == 24:
        b = raw.astype(np.int32)
        x = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        x = np.where(x >= 1 << 23, x - (1 << 24), x)
        return x.astype(np.float64) / float(1 << 23)
    dtype = {16: "<i2", 32: "<i4"}[bits]
    return raw.view(dtype).reshape(-1).astype(np.float64) / float(1 << (bits - 1))


def _channel_frames(path, layout: _WavLayout, channel: int, first: int = 0,
                    count: Optional[int] = None) -> np.ndarray:
    width = layout.bits // 8
    if count is None:
        count = layout.n_frames - first
    count = max(0, min(count, layout.n_frames - first))
    if count == 0:
        return np.zeros(0)
    mm = np.memmap(path, dtype=np.uint8, mode="r", offset=layout.data_offset,
                   shape=(layout.n_frames, layout.n_channels, width))
    raw = np.ascontiguousarray(mm[first:first + count, channel, :])
    del mm
    return _normalize(raw, layout)


def open_audio(path, channel: int = 0, start_epoch: Optional[float] = None) -> AudioStream:
    """Decode one channel of a WAV file.

    Args:
        path: RIFF/WAVE file with 8/16/24/32-bit integer PCM or 32-bit float samples.
        channel: zero-based channel index.
        start_epoch: optional absolute timestamp (s) of the first sample.

    Returns:
        AudioStream with samples normalized to [-1, 1].

    Raises:
        UnsupportedFormatError, CorruptHeaderError, ChannelOutOfRangeError
    """
    path = str(path)
    layout = _read_layout(path)
    if not 0 <= channel < layout.n_channels:
        raise ChannelOutOfRangeError(
            f"{path}: channel {channel} requested, file has {layout.n_channels}")
    samples = _channel_frames(path, layout, channel)
    return AudioStream(samples, layout.sample_rate, channel, path, start_epoch)


def slice_starts(n_samples: int, sample_rate: int, window_s: float, hop_s: float) -> list:
    """Start offsets (in samples) of every window with at least half its length covered."""
    if not 0 < hop_s <= window_s:
        raise ValueError("need 0 < hop_s <= window_s")
    window = int(round(window_s * sample_rate))
    hop = int(round(hop_s * sample_rate))
    starts = []
    k = 0
    while True:
        start = k * hop
        # integer comparison avoids float drift on long recordings
        if 2 * (n_samples - start) < window:
            break
        starts.append(start)
        k += 1
    return starts


def slice_windows(stream: AudioStream, window_s: float = 30.0, hop_s: float = 15.0) -> list:
    """Cut ``stream`` into windows of ``window_s`` seconds advanced by ``hop_s``.

    A trailing window is kept (zero-padded) only when real samples cover at
    least half of it.
    """
    n = len(stream.samples)
    if n == 0:
        raise EmptyStreamError("cannot slice an empty stream")
    rate = stream.sample_rate
    window = int(round(window_s * rate))
    stem = Path(stream.source_path).stem if stream.source_path else "stream"
    slices = []
    for idx, start in enumerate(slice_starts(n, rate, window_s, hop_s)):
        chunk = stream.samples[start:start + window]
        if len(chunk) < window:
            chunk = np.concatenate([chunk, np.zeros(window - len(chunk))])
        slices.append(SignalSlice(chunk, rate, start / rate, window / rate,
                                  f"{stem}:{idx:06d}", stream.source_path))
    return slices


def iter_file_slices(path, channel: int = 0, window_s: float = 30.0,
                     hop_s: float = 15.0) -> Iterator[SignalSlice]:
    """Yield the same slices as ``slice_windows(open_audio(path))`` without decoding
    the whole file up front."""
    path = str(path)
    layout = _read_layout(path)
    if not 0 <= channel < layout.n_channels:
        raise ChannelOutOfRangeError(
            f"{path}: channel {channel} requested, file has {layout.n_channels}")
    if layout.n_frames == 0:
        raise EmptyStreamError(f"{path}: no samples")
    rate = layout.sample_rate
    window = int(round(window_s * rate))
    stem = Path(path).stem
    for idx, start in enumerate(slice_starts(layout.n_frames, rate, window_s, hop_s)):
        chunk = _channel_frames(path, layout, channel, start, window)
        if len(chunk) < window:
            chunk = np.concatenate([chunk, np.zeros(window - len(chunk))])
        yield SignalSlice(chunk, rate, start / rate, window / rate, f"{stem}:{idx:06d}", path)


def wav_info(path) -> dict:
    layout = _read_layout(str(path))
    return {"sample_rate": layout.sample_rate, "channels": layout.n_channels,
            "bits": layout.bits, "n_frames": layout.n_frames,
            "duration_s": layout.n_frames / layout.sample_rate}


def write_wav(path, samples, sample_rate: int, subtype: str = "float32") -> None:
    """Write mono or (n, channels) samples in [-1, 1]; ``subtype`` is 'float32' or 'int16'."""
    x = np.asarray(samples, dtype=np.float64)
    if subtype == "float32":
        data = x.astype(np.float32)
    elif subtype == "int16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown subtype {subtype!r}")
    wavfile.write(str(path), int(sample_rate), data)


def expected_slice_count(duration_s: float, window_s: float, hop_s: float) -> int:
    """Closed-form count of offsets t = k*hop with duration - t >= window/2."""
    if duration_s < window_s / 2:
        return 0
    return int(math.floor((duration_s - window_s / 2) / hop_s + 1e-9)) + 1
