import numpy as np
import pytest

from polystab.kappa_bounds import webster_certificate
from polystab.spectral_model import expand, webster_basis
from polystab.truncation import WeakRankOne, assemble_wave


def one_minus_x(x):
    return 1.0 - x


@pytest.fixture(scope="session")
def webster200():
    return webster_basis(2.0, 200)


@pytest.fixture(scope="session")
def golden_damping(webster200):
    return expand(one_minus_x, webster200)


@pytest.fixture(scope="session")
def golden_system(webster200, golden_damping):
    return assemble_wave(webster200, WeakRankOne(golden_damping))


@pytest.fixture(scope="session")
def golden_certificate():
    return webster_certificate()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
