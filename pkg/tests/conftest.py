import numpy as np
import pytest

from mdgs.disorder import WeightAssignment
from mdgs.lattice import from_edge_list


def weights(lattice, values):
    return WeightAssignment(lattice, np.asarray(values, dtype=float))


@pytest.fixture
def edge_uv():
    """Single edge u-v: sites 0=u, 1=v, 2=(u,v)."""
    return from_edge_list(2, [(0, 1)])


@pytest.fixture
def triangle():
    return from_edge_list(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def cycle4():
    return from_edge_list(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


@pytest.fixture
def path3():
    return from_edge_list(3, [(0, 1), (1, 2)])


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
