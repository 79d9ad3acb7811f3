import numpy as np
import pytest

from moveprim.core import N_COLUMNS, Dataset, LabeledSegment, PrimitiveLabel, Recording
from moveprim.synth import SignalGenSpec, gen_signal_dataset

SMALL_SPEC = SignalGenSpec(counts=(24, 24, 24, 24), n_recordings=4, seed=3)


@pytest.fixture(scope="session")
def small_dataset():
    return gen_signal_dataset(SMALL_SPEC)


@pytest.fixture(scope="session")
def default_dataset():
    """The default simulator output, generated once per session."""
    return gen_signal_dataset(SignalGenSpec())


def make_recording(T, seed=0, rate=240.0, subject="S01", trial="T01"):
    rng = np.random.default_rng(seed)
    return Recording.from_samples(rng.standard_normal((T, N_COLUMNS)), rate, subject, trial)


def make_dataset(spans, T=None, seed=0):
    """One recording with segments given as ``(start, end, label)``."""
    T = T or max(e for _, e, _ in spans)
    rec = make_recording(T, seed)
    return Dataset([(rec, [LabeledSegment(s, e, PrimitiveLabel(k)) for s, e, k in spans])])


_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the end-of-run summary."""

    def record(number: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
