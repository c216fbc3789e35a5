import numpy as np
import pytest

from pulsetrain.audio_io import SignalSlice

# criterion id -> (passed, detail), filled by test_acceptance and printed at the end
ACCEPTANCE = {}


def make_slice(samples, rate=2000, start=0.0, slice_id="t:000000", source="t.wav"):
    samples = np.asarray(samples, dtype=np.float64)
    return SignalSlice(samples, rate, start, len(samples) / rate, slice_id, source)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
