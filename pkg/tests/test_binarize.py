import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pulsetrain.binarize import (IntensityImage, MaskLevel, ShapeMismatchError, apply_mask,
                                 compute_mask_level, to_intensity_image, binarize)
from pulsetrain.dsp import Spectrogram


def _spec(power):
    return Spectrogram(np.asarray(power, dtype=float), 0.0205, 3.90625, 78.125, 0.0)


def _img(px):
    return IntensityImage(np.asarray(px, dtype=float), 0.0205, 3.90625, 78.125, 0.0)


def test_constant_power_maps_to_zero():
    assert not to_intensity_image(_spec(np.full((5, 4), 3.0))).pixels.any()
    assert not to_intensity_image(_spec(np.zeros((5, 4)))).pixels.any()


def test_two_valued_image():
    p = np.where(np.arange(20).reshape(4, 5) % 2, 1e-4, 1e-2)
    px = to_intensity_image(_spec(p)).pixels
    np.testing.assert_array_equal(px, np.where(p > 1e-3, 1.0, 0.0))


def test_dynamic_range_floor():
    px = to_intensity_image(_spec([[1.0, 1e-9, 0.0, 1e-3]]), dyn_range_db=60).pixels
    np.testing.assert_allclose(px, [[1.0, 0.0, 0.0, 0.5]])


def test_mask_level_examples():
    lv = compute_mask_level(_img(np.full((3, 3), 0.4)))
    assert (lv.mu, lv.sigma, lv.gamma) == (pytest.approx(0.4), 0.0, pytest.approx(0.4))
    half = np.tile([0.0, 1.0], (4, 4))
    lv = compute_mask_level(_img(half))
    assert lv.mu == 0.5 and lv.sigma == 0.5 and lv.gamma == 1.375
    assert not apply_mask(_img(half), lv).bits.any()
    assert not apply_mask(_img(np.full((3, 3), 0.4)), compute_mask_level(_img(np.full((3, 3), 0.4)))).bits.any()


def test_bimodal_image_selects_bright_cluster(rng):
    px = rng.uniform(0, 0.05, (50, 50))
    bright = rng.permutation(2500)[:100]  # 4%
    px.flat[bright] = 1.0
    bits = apply_mask(_img(px), compute_mask_level(_img(px))).bits
    assert set(np.flatnonzero(bits)) == set(bright)


def _two_pass(px):
    n = px.size
    mean = sum(float(v) for v in px.ravel()) / n
    var = sum((float(v) - mean) ** 2 for v in px.ravel()) / n
    return 1.75 * var ** 0.5 + mean


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 20)),
              elements=st.floats(0, 1)))
def test_mask_level_matches_two_pass_oracle(px):
    g = compute_mask_level(_img(px)).gamma
    assert g == pytest.approx(_two_pass(px), rel=1e-12, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 15), st.integers(1, 15)), elements=st.floats(0, 1)),
       st.floats(0.5, 3.0))
def test_threshold_is_monotone(px, coef):
    lo = apply_mask(_img(px), compute_mask_level(_img(px), coef)).bits
    hi = apply_mask(_img(px), compute_mask_level(_img(px), coef + 0.5)).bits
    assert np.all(hi <= lo)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), exp=st.integers(-6, 6))
def test_binarize_invariant_to_power_of_ten_gain(seed, exp):
    p = np.random.default_rng(seed).exponential(1.0, (40, 30))
    a, _ = binarize(_spec(p))
    b, _ = binarize(_spec(p * 10.0 ** exp))
    assert np.sum(a.bits != b.bits) <= 1  # at most a pixel sitting on gamma
    assert a.bits.shape == (40, 30)


def test_gaussian_white_fraction(rng):
    px = rng.standard_normal((500, 70))
    bits = apply_mask(_img(px), compute_mask_level(_img(px))).bits
    assert 0.01 <= bits.mean() <= 0.08  # one-sided tail beyond 1.75 sigma is about 4%


def test_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        apply_mask(_img(np.zeros((2, 2))), MaskLevel(0.5, 0.5, 0.0, 1.75, (3, 3)))
