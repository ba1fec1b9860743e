import pytest

from logkg import ReferenceQuality, get_problem, make_reference


@pytest.fixture(scope="session")
def gausson():
    return get_problem("example1")


@pytest.fixture(scope="session")
def bump():
    return get_problem("example2")


@pytest.fixture(scope="session")
def gausson_reference(gausson):
    """Fine-grid reference for the traveling wave at the limit epsilon,
    serving T = 0.5 and T = 1.0.  Built once; several tests share it."""
    return make_reference(gausson, 1e-7, (0.5, 1.0), ReferenceQuality.FINE_GRID)
