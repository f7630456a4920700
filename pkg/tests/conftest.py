import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wconvex.catalog import standard_spaces

settings.register_profile("wconvex", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("wconvex")

FAMILIES = ["l2", "l1", "linf", "ball", "interval", "product"]


@pytest.fixture(scope="session")
def spaces():
    return standard_spaces()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
