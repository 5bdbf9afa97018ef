import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def report():
    """Record a one-line acceptance verdict; printed now and in the summary."""
    def _report(number, passed, detail, seconds):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({seconds:.1f} s) {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _report
