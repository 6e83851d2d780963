import numpy as np
import pytest
from hypothesis import settings

from prandtl_lab.numerics import PeriodicGridX, build_grid

settings.register_profile("lab", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def ygrid():
    return build_grid(20.0, 256)


@pytest.fixture(scope="session")
def xgrid():
    return PeriodicGridX(16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
