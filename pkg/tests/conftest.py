import os

import pytest
from hypothesis import HealthCheck, settings

from martensim.blocks import make_library
from martensim.core import make_boundary_data, make_wells
from martensim.fragment import DEFAULT_M

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def wells():
    return make_wells(0.5)


@pytest.fixture(scope="session")
def bdata(wells):
    return make_boundary_data(DEFAULT_M, wells)


@pytest.fixture(scope="session")
def lib(wells, bdata):
    return make_library(bdata, wells, 0.4, 3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
