from __future__ import annotations

import numpy as np
import pytest

from idealsurf.analytic import ParametricSurface, sample_mesh
from idealsurf.generators import disk_mesh, icosphere

CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL verdict; the lines are repeated at the end
    of the run."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        CRITERIA.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cubic32():
    return sample_mesh(ParametricSurface.graph([(1.0, 3, 0)]), 32)


@pytest.fixture(scope="session")
def ico3():
    return icosphere(3)


@pytest.fixture(scope="session")
def flat_disk():
    return disk_mesh(24)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
