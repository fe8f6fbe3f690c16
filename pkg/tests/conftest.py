import numpy as np
import pytest
from hypothesis import settings

from horoflow import flows, planar_toy, surface

settings.register_profile("default", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def group():
    return surface.build_bolza()


@pytest.fixture(scope="session")
def bolza(group):
    return flows.HyperbolicBackend(group=group)


@pytest.fixture(scope="session")
def planar():
    return flows.make_backend("planar")


@pytest.fixture(scope="session")
def u(group):
    return surface.periodic_function(2.0, group=group)


@pytest.fixture(scope="session")
def bump():
    return planar_toy.planar_bump(0.5, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
