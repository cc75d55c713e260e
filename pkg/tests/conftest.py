import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from mmaf_lab.core import MassPartition
from mmaf_lab.flow import GridSpec

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# (criterion id, report lines) collected by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = []


@st.composite
def partitions(draw, min_n=1, max_n=8):
    n = draw(st.integers(min_n, max_n))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    m = np.asarray(raw) / np.sum(raw)
    m[-1] = 1.0 - m[:-1].sum()
    return MassPartition(tuple(m))


@st.composite
def scenarios(draw, min_n=1, max_n=8):
    """Partition, sorted start values (ties allowed) and a seed.

    Starts live on a 1e-3 lattice: distinct starts closer than the coalescence
    tolerance would make "touching" ambiguous at t = 0.
    """
    p = draw(partitions(min_n, max_n))
    g = np.sort(draw(st.lists(st.integers(-1000, 1000), min_size=p.n, max_size=p.n))) / 1000.0
    if p.n > 1 and draw(st.booleans()):
        g[1] = g[0]
    seed = draw(st.integers(0, 2**31 - 1))
    return p, g, seed


@pytest.fixture
def coarse_grid():
    return GridSpec(1e-2, 1.0)


@pytest.fixture
def fine_grid():
    return GridSpec(1e-3, 1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, lines in sorted(ACCEPTANCE_LINES):
            for line in lines:
                terminalreporter.write_line(line)
