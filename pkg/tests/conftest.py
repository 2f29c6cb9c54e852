import numpy as np
import pytest

from ekdesign import CovParams, GpModel, GridCriteria, GridSpace, KernelFamily, Variant, lh_star_7, snap_to_grid


@pytest.fixture(scope="session")
def unit_grid():
    """25 x 25 lattice on the unit square; candidates double as eval points."""
    return GridSpace.regular(25)


@pytest.fixture(scope="session")
def exp7_model():
    return GpModel(KernelFamily(Variant.EXPONENTIAL), CovParams(rho=7.0), sigma2=1.0, trend="constant")


@pytest.fixture(scope="session")
def exp7_criteria(exp7_model, unit_grid):
    return GridCriteria(exp7_model, unit_grid)


@pytest.fixture(scope="session")
def lh7(unit_grid):
    return snap_to_grid(lh_star_7(), unit_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
