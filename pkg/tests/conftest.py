import os

import pytest
from hypothesis import HealthCheck, settings

from fracbsq.norms import DissipationParams, GevreyParams
from fracbsq.spectral import make_grid

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _single_thread(monkeypatch):
    # Tests that care about BSQ_THREADS set it themselves.
    monkeypatch.delenv("BSQ_THREADS", raising=False)


@pytest.fixture
def grid8():
    return make_grid(8)


@pytest.fixture
def grid16():
    return make_grid(16)


@pytest.fixture
def params():
    return GevreyParams(1.0, 2.0, 0.5)


@pytest.fixture
def diss():
    return DissipationParams(1.0, 1.0)


@pytest.fixture
def verdict(record_property):
    """Record one ``PASS``/``FAIL`` line for an acceptance criterion and assert on it."""

    def emit(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else "")
        print(line)
        record_property("acceptance", line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for rep in terminalreporter.stats.get("passed", []) + terminalreporter.stats.get("failed", [])
        if rep.when == "call"
        for name, value in rep.user_properties
        if name == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
