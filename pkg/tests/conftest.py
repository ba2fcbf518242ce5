import math

import pytest

from rwanon.closed_form import RRGContext
from rwanon.graph import generate_rrg

LN5 = math.log(5)

# lines recorded by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def ctx():
    return RRGContext(300, 4)


@pytest.fixture(scope="session")
def rrg():
    return generate_rrg(300, 4, 7)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
