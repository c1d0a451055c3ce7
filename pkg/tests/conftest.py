import numpy as np
import pytest

from phscrn.core import FrameSeries

DELTA = 0.00224
FS = 1000.0
LAMBDA = 532e-9


def make_series(frames, mask=None, delta=DELTA, fs=FS, lam=LAMBDA):
    return FrameSeries(np.asarray(frames, dtype=float), delta, fs, lam, mask)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed after the test session so the
# verdicts survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
