import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pulsetrain.audio_io import slice_windows
from pulsetrain.binarize import BinaryImage
from pulsetrain.detector import (ACCEPTED, IPI_NONCONFORMING, TOO_FEW, EnergyProjection, PeakList,
                                 PulseRules, PulseTrainEvent, apply_pulse_train_rules, analyze_slice,
                                 detect_slice, energy_projection, find_local_maxima,
                                 merge_overlapping_events)
from pulsetrain.synth import SynthSpec, TrainSpec, generate_clip

from conftest import make_slice


def _bw(bits):
    return BinaryImage(np.asarray(bits, dtype=np.uint8), 0.0205, 3.90625, 78.125, 0.0, 0.128)


def _proj(values):
    return EnergyProjection(np.asarray(values), 0.0205, 0.0)


def test_projection_examples():
    assert not energy_projection(_bw(np.zeros((6, 4)))).values.any()
    np.testing.assert_array_equal(energy_projection(_bw(np.ones((6, 4)))).values, [4] * 6)


def test_projection_matches_nested_loop_count(rng):
    for _ in range(100):
        bits = rng.integers(0, 2, (64, 64))
        expect = [sum(int(bits[n, m]) for m in range(64)) for n in range(64)]
        assert energy_projection(_bw(bits)).values.tolist() == expect


def test_local_maxima_examples():
    assert find_local_maxima(_proj([0, 7, 0, 8, 0]), 6).indices.tolist() == [1, 3]
    assert find_local_maxima(_proj([0, 7, 7, 0]), 6).indices.tolist() == [1]
    assert find_local_maxima(_proj([7, 8, 9, 10]), 6).indices.tolist() == [3]
    assert find_local_maxima(_proj([10, 9, 8]), 6).indices.tolist() == [0]
    assert find_local_maxima(_proj([0, 6, 0]), 6).indices.tolist() == []  # strict threshold
    assert find_local_maxima(_proj([0, 7, 7, 9, 0]), 6).indices.tolist() == [3]


def _maxima_oracle(v, thr):
    """Exhaustive scan: compress runs, then compare each run with its neighbours."""
    runs = []
    for i, x in enumerate(v):
        if runs and runs[-1][0] == x:
            continue
        runs.append((x, i))
    out = []
    for k, (x, i) in enumerate(runs):
        left = runs[k - 1][0] if k > 0 else -np.inf
        right = runs[k + 1][0] if k + 1 < len(runs) else -np.inf
        if x > thr and x > left and x > right:
            out.append(i)
    return out


@settings(max_examples=200, deadline=None)
@given(arrays(np.int64, st.integers(1, 60), elements=st.integers(0, 12)), st.integers(0, 10))
def test_local_maxima_match_oracle(v, thr):
    peaks = find_local_maxima(_proj(v), thr)
    assert peaks.indices.tolist() == _maxima_oracle(v.tolist(), thr)
    np.testing.assert_array_equal(peaks.heights, v[peaks.indices])


def _peaks(times, bin_s=0.0205):
    idx = np.round(np.asarray(times) / bin_s).astype(int)
    return PeakList(idx, np.full(len(idx), 10), 6)


def test_rules_examples():
    rules = PulseRules()
    d = apply_pulse_train_rules(_peaks(np.arange(12) * 0.30), rules, 0.0205, 0.0)
    assert d.accepted and d.reason == ACCEPTED and d.n_peaks == 12
    assert d.event.f_lo == 75.0 and d.event.f_hi == 350.0
    d = apply_pulse_train_rules(_peaks(np.arange(12) * 0.10), rules, 0.0205, 0.0)
    assert not d.accepted and d.reason == IPI_NONCONFORMING
    d = apply_pulse_train_rules(PeakList(np.zeros(0, int), np.zeros(0), 6), rules, 0.0205, 0.0)
    assert d.reason == TOO_FEW
    d = apply_pulse_train_rules(_peaks(np.arange(136) * 0.1), rules, 0.0205, 0.0)
    assert d.reason == "too-many"


def test_rules_validation():
    with pytest.raises(ValueError):
        PulseRules(ipi_lo=0.5, ipi_hi=0.2)
    with pytest.raises(ValueError):
        PulseRules(min_peaks=10, max_peaks=5)


def test_detect_slice_finds_injected_train():
    tr = TrainSpec(5.0, 3.3, 70, 0.045, (100.0, 300.0), 15.0)
    stream, truth = generate_clip(SynthSpec(duration_s=40.0, trains=[tr], seed=7))
    slc = slice_windows(stream)[0]
    events = detect_slice(slc)
    assert len(events) == 1
    inside = sum(1 for t in truth.intervals[0].pulse_times if t < 30.0 - 0.15)
    assert abs(events[0].n_peaks - inside) <= 2


def test_noise_and_silence_give_no_event():
    rng = np.random.default_rng(99)
    hits = sum(bool(detect_slice(make_slice(rng.standard_normal(60000)))) for _ in range(100))
    assert hits <= 5
    assert detect_slice(make_slice(np.zeros(60000))) == []


def test_detect_is_deterministic():
    stream, _ = generate_clip(SynthSpec(duration_s=30.0, trains=[TrainSpec(3.0, 3.5, 80)], seed=3))
    slc = slice_windows(stream)[0]
    a, b = analyze_slice(slc), analyze_slice(slc)
    np.testing.assert_array_equal(a.binary.bits, b.binary.bits)
    np.testing.assert_array_equal(a.events[0].peak_times, b.events[0].peak_times)


def _ev(a, b, step=0.3, sid=""):
    times = np.arange(a, b + 1e-9, step)
    return PulseTrainEvent(a, b, times, np.full(len(times), 10), 75.0, 350.0, sid)


def test_merge_examples():
    merged = merge_overlapping_events([_ev(10, 40), _ev(25, 55)])
    assert len(merged) == 1
    assert (merged[0].start_time, merged[0].end_time) == (10, 55)
    assert merged[0].n_slices == 2
    disjoint = merge_overlapping_events([_ev(0, 10), _ev(20, 30)])
    assert [(e.start_time, e.end_time) for e in disjoint] == [(0, 10), (20, 30)]
    dup = merge_overlapping_events([_ev(10, 40), _ev(10, 40)])
    assert len(dup) == 1 and dup[0].n_peaks == _ev(10, 40).n_peaks


def test_merge_needs_half_of_shorter_span():
    # overlap 5 s of a 20 s shorter span
    assert len(merge_overlapping_events([_ev(0, 30), _ev(25, 45)])) == 2
    assert len(merge_overlapping_events([_ev(0, 30), _ev(25, 45)], edge_allowance_s=5.0)) == 1


@settings(max_examples=100, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 30), st.integers(1, 30)), elements=st.integers(0, 1)),
       st.integers(0, 10), st.integers(1, 5))
def test_projection_conserves_pixels_and_peaks_shrink(bits, t1, dt):
    p = energy_projection(_bw(bits))
    assert p.values.sum() == bits.sum()
    low = set(find_local_maxima(p, t1).indices.tolist())
    high = set(find_local_maxima(p, t1 + dt).indices.tolist())
    assert high <= low
