import numpy as np
import pytest

from blochpt.core import PaperParams
from blochpt.lattice import Lattice
from blochpt.potential import FourierPotential

ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def square():
    return Lattice.square(2)


@pytest.fixture(scope="session")
def hexagonal():
    return Lattice.hexagonal()


@pytest.fixture(scope="session")
def q_sep(square):
    """2 cos x1 + 2 cos x2."""
    return FourierPotential.cosines(square, {(1, 0): 1.0, (0, 1): 1.0})


@pytest.fixture(scope="session")
def q_x1(square):
    """2 cos x1."""
    return FourierPotential.cosines(square, {(1, 0): 1.0})


@pytest.fixture(scope="session")
def q_zero(square):
    return FourierPotential.zero(square)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def params(rho, **kw):
    return PaperParams.standard(2, float(rho), **kw)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
