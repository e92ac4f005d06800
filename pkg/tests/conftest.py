import pytest

from cycleshift import problems
from cycleshift.floquet import floquet_basis


@pytest.fixture(scope="session")
def paper():
    return problems.resolve("paper-example")


@pytest.fixture(scope="session")
def paper_basis(paper):
    return floquet_basis(paper.cycle)


@pytest.fixture(scope="session")
def circle_soft():
    return problems.resolve("circle-soft")


@pytest.fixture(scope="session")
def circle3d():
    return problems.resolve("circle3d")


@pytest.fixture(scope="session")
def circle3d_basis(circle3d):
    return floquet_basis(circle3d.cycle)


@pytest.fixture(scope="session")
def vdp():
    return problems.resolve("vdp-forced")


@pytest.fixture(scope="session")
def vdp_basis(vdp):
    return floquet_basis(vdp.cycle)
