import numpy as np
import pytest

FIG1_Z = [-1.0, 0.0, 1.4, 1.6]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fig1_z():
    return np.array(FIG1_Z)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
