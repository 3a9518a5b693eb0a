"""Shared fixtures plus the acceptance-criteria summary hook."""

import numpy as np
import pytest

from torusswarm import HAVE_COMPILED

BACKENDS = ["python"] + (["compiled"] if HAVE_COMPILED else [])

# test_acceptance appends one line per criterion; printing happens in the
# terminal-summary hook so the lines survive pytest's output capture.
CRITERIA_LINES = []


def record_criterion(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    line = f"{status}  {name}"
    if detail:
        line += f"  ({detail})"
    CRITERIA_LINES.append(line)
    return ok


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run the test once per available backend."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in CRITERIA_LINES:
        terminalreporter.write_line(line)
