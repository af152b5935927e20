import numpy as np
import pytest

from districtsim import ElectorateSpec


@pytest.fixture
def small_spec():
    return ElectorateSpec.uniform(10, 1000, (0.5, 0.3, 0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
