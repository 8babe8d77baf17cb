"""Shared fixtures and the acceptance summary printed at the end of a run."""

import numpy as np
import pytest

from okflow.instrument import reset

# name -> (passed, detail); filled in by test_acceptance
ACCEPTANCE = {}


def record(key, title, passed, detail):
    ACCEPTANCE[key] = (title, bool(passed), detail)
    return passed


@pytest.fixture
def acceptance():
    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _fresh_counters():
    reset()
    yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} [{key}] {title}: {detail}")
