import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def _report(criterion: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] {criterion}" + (f": {detail}" if detail else ""))

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
