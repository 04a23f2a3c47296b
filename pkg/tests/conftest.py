from fractions import Fraction

import pytest

from krsoliton.exact_poly import Geometry
from krsoliton.geometry import build_grid
from krsoliton.profile import solve

F1 = Geometry(1, 1, Fraction(2), Fraction(1))
STEADY_11 = Geometry(1, 1, Fraction(1), Fraction(1))
EXPANDING_12 = Geometry(1, 2, Fraction(1), Fraction(1))
CIGAR = Geometry(0, 1, Fraction(0), Fraction(0))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def shrinker():
    return solve(F1)


@pytest.fixture(scope="session")
def shrinker_grid(shrinker):
    return build_grid(shrinker)


@pytest.fixture(scope="session")
def compact():
    return solve(F1, compact=True)


@pytest.fixture(scope="session")
def compact_grid(compact):
    return build_grid(compact)


@pytest.fixture(scope="session")
def steady():
    return solve(STEADY_11, mu=-1.0)


@pytest.fixture(scope="session")
def steady_grid(steady):
    return build_grid(steady)


@pytest.fixture(scope="session")
def expanding():
    return solve(EXPANDING_12, mu=-1.0)


@pytest.fixture(scope="session")
def cigar():
    return solve(CIGAR, mu=-1.0)


@pytest.fixture(scope="session")
def cigar_grid(cigar):
    return build_grid(cigar)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
