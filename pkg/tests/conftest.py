import pytest

from slowosc.feedback import HppParams, HprimeParams, build_hpp_feedback, build_plateau_feedback
from slowosc.dde import Segment
from slowosc.return_map import iterate_to_fixed_point

EXAMPLE = HppParams(a=1.0, c=0.05, delta=2 / 3, gamma=4.0)
LONG = HppParams(a=1.0, c=0.004, delta=0.05, gamma=4.5)
PLATEAU = HprimeParams(mu=1.0, beta=0.1, sigma=1.0)


@pytest.fixture(scope="session")
def f_example():
    return build_hpp_feedback(EXAMPLE, -2.0)


@pytest.fixture(scope="session")
def f_plateau():
    return build_plateau_feedback(PLATEAU, -1.0)


@pytest.fixture(scope="session")
def sop_example(f_example):
    return iterate_to_fixed_point(f_example, Segment.ramp(3.0))


@pytest.fixture(scope="session")
def sop_plateau(f_plateau):
    return iterate_to_fixed_point(f_plateau, Segment.ramp(0.5))


# -- acceptance summary ----------------------------------------------------------

_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion as a PASS/FAIL line."""
    def record(label: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
