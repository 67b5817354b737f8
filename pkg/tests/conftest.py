import numpy as np
import pytest

from biym.lattice import ConformalMetric, LatticeSpec, PForm
from biym.algebra import dim_so

ACCEPTANCE_LINES = []


def rand_form(p, lattice, m, rng, scale=1.0):
    return PForm.from_vector(p, lattice, m, scale * rng.standard_normal(lattice.cells(p) * dim_so(m)))


def rand_metric(lattice, rng):
    return ConformalMetric(lattice, rng.uniform(0.5, 2.0, lattice.extents))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
