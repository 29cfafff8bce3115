import pytest

from boundary_ot import measure
from boundary_ot.ground_cost import GroundCost

# acceptance criterion lines, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def unit_density():
    return measure.uniform(1.0, 2)


@pytest.fixture
def l2():
    return GroundCost.lp(2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
