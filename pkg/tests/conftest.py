import numpy as np
import pytest

from ersim.levels import build_level_scheme, transition_table


@pytest.fixture(scope="session")
def scheme():
    return build_level_scheme()


@pytest.fixture(scope="session")
def table(scheme):
    return transition_table(scheme)


@pytest.fixture(scope="session")
def full_table(scheme):
    return transition_table(scheme, include_branching=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
