import warnings

import numpy as np
import pytest

from nestlattice.errors import MinFeatureWarning
from nestlattice.geometry import Segment, StrutModel

L0 = 8.75


def through_cylinder(d=0.8, L=L0, axis=0):
    """Straight strut along one axis crossing the whole cell."""
    a, b = np.zeros(3), np.zeros(3)
    a[axis], b[axis] = -L, L
    return StrutModel(L, [Segment(a, b, d / 2)])


def ball(r=2.0, L=L0):
    """Near-zero-length capsule, i.e. a sphere of radius ``r`` at the center."""
    return StrutModel(L, [Segment((0, 0, 0), (1e-9, 0, 0), r)])


@pytest.fixture(autouse=True)
def _quiet_min_feature():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MinFeatureWarning)
        yield


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
