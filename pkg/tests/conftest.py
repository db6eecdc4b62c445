import numpy as np
import pytest

_RESULTS = {}


@pytest.fixture
def record_criterion():
    """Record one acceptance line: record_criterion(number, passed, detail)."""
    def record(number, passed, detail=""):
        _RESULTS[number] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        passed, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
