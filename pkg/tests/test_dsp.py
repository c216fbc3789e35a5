import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsetrain.dsp import (CropOutOfRangeError, FilterSpec, InfeasibleFilterError, RateMismatchError,
                            SliceTooShortError, StftParams, apply_filter, compute_spectrogram,
                            design_bandpass, measure_response)

from conftest import make_slice

FS = 2000


@pytest.fixture(scope="module")
def kernel():
    return design_bandpass(FilterSpec(), FS)


def _dtft_db(taps, freqs, fs):
    """Response by direct evaluation of sum h[n] exp(-j w n)."""
    n = np.arange(len(taps))
    h = np.exp(-2j * np.pi * np.outer(freqs, n) / fs) @ taps
    return 20 * np.log10(np.abs(h))


def test_kernel_meets_spec_by_direct_dtft(kernel):
    spec = kernel.spec
    freqs = np.linspace(0, FS / 2, 4096)
    db = _dtft_db(kernel.taps, freqs, FS)
    passband = (freqs >= spec.pass_lo) & (freqs <= spec.pass_hi)
    stop = (freqs <= spec.pass_lo - spec.transition_hz) | (freqs >= spec.pass_hi + spec.transition_hz)
    assert np.max(np.abs(db[passband])) <= 0.1
    assert np.max(db[stop]) <= -30
    # scipy's freqz-based measure agrees with the direct sum
    r = measure_response(kernel.taps, spec, FS, n_grid=4096)
    assert r["max_passband_deviation_db"] <= 0.1
    assert r["max_stopband_gain_db"] <= -30


def test_kernel_is_symmetric(kernel):
    np.testing.assert_allclose(kernel.taps, kernel.taps[::-1], atol=1e-15)
    assert kernel.group_delay_samples == (len(kernel.taps) - 1) // 2


def test_infeasible_spec():
    with pytest.raises(InfeasibleFilterError):
        design_bandpass(FilterSpec(pass_lo=10.0, transition_hz=40.0), FS)
    with pytest.raises(ValueError):
        design_bandpass(FilterSpec(pass_hi=1500.0), FS)


def _steady_rms(y, kernel):
    gd = kernel.group_delay_samples
    return np.sqrt(np.mean(y[2 * gd:-2 * gd] ** 2))


def test_tone_gains(kernel):
    t = np.arange(20 * FS) / FS
    for f, check in ((200.0, lambda d: abs(d) <= 0.1), (20.0, lambda d: d <= -30)):
        x = np.sin(2 * np.pi * f * t)
        y = apply_filter(make_slice(x), kernel).samples
        ratio_db = 20 * np.log10(_steady_rms(y, kernel) / _steady_rms(x, kernel))
        assert check(ratio_db), (f, ratio_db)


def test_zero_and_impulse(kernel):
    assert not apply_filter(make_slice(np.zeros(4000)), kernel).samples.any()
    x = np.zeros(4000)
    x[2000] = 1.0
    y = apply_filter(make_slice(x), kernel).samples
    gd = kernel.group_delay_samples
    np.testing.assert_allclose(y[2000 - gd:2000 + gd + 1], kernel.taps, atol=1e-14)
    assert np.abs(y[:2000 - gd]).max() < 1e-14


def test_rate_mismatch(kernel):
    with pytest.raises(RateMismatchError):
        apply_filter(make_slice(np.zeros(100), rate=4000), kernel)


def test_bin_geometry():
    spec = compute_spectrogram(make_slice(np.zeros(60000)), StftParams(512, 41), crop=(75, 350))
    assert spec.time_bin_s == 0.0205
    assert spec.freq_bin_hz == 3.90625
    assert spec.shape == ((60000 - 512) // 41 + 1, 70)
    assert spec.f0_hz == 20 * 3.90625
    assert not spec.power.any()
    assert spec.frame_times()[0] == 256 / FS


def test_tone_at_bin_100_matches_direct_dft():
    n = np.arange(4096)
    x = np.cos(2 * np.pi * 390.625 * n / FS + 0.3)
    spec = compute_spectrogram(make_slice(x), StftParams(512, 41), crop=(0, 1000))
    assert np.all(np.argmax(spec.power, axis=1) == 100)
    # frame 3 against sum_n x[n] w[n] exp(-2 pi j k n / N)
    frame = x[3 * 41:3 * 41 + 512] * np.blackman(512)
    m = np.arange(512)
    dft = np.array([np.sum(frame * np.exp(-2j * np.pi * k * m / 512)) for k in range(257)])
    expected = np.abs(dft) ** 2 / 512
    expected[1:256] *= 2
    np.testing.assert_allclose(spec.power[3], expected, rtol=1e-9, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), c=st.floats(1e-3, 1e3))
def test_power_scales_with_square_and_keeps_parseval(seed, c):
    x = np.random.default_rng(seed).standard_normal(2048)
    full = compute_spectrogram(make_slice(x), StftParams(512, 41), crop=(0, 1000))
    scaled = compute_spectrogram(make_slice(c * x), StftParams(512, 41), crop=(0, 1000))
    np.testing.assert_allclose(scaled.power, c * c * full.power, rtol=1e-9)
    # one-sided power sums to the windowed frame energy
    frame = x[:512] * np.blackman(512)
    assert np.isclose(full.power[0].sum(), np.sum(frame ** 2), rtol=1e-10)


def test_spectrogram_errors():
    with pytest.raises(SliceTooShortError):
        compute_spectrogram(make_slice(np.zeros(100)))
    with pytest.raises(CropOutOfRangeError):
        compute_spectrogram(make_slice(np.zeros(1000)), crop=(100, 1500))
    with pytest.raises(ValueError):
        StftParams(500, 41)
