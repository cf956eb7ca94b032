"""
Shared grids, ground states and solver contexts.
"""
import pytest

from src.groundstate import petviashvili
from src.radial import RadialGrid
from src.solver import SolveConfig, SolverContext
from src.symbols import SymbolParams


@pytest.fixture(scope="session")
def grid1():
    return RadialGrid(1, 1024, 40.0)


@pytest.fixture(scope="session")
def grid3():
    return RadialGrid(3, 1024, 40.0)


@pytest.fixture(scope="session")
def soliton1(grid1):
    return petviashvili(3.0, grid1)


@pytest.fixture(scope="session")
def soliton3(grid3):
    return petviashvili(3.0, grid3)


@pytest.fixture(scope="session")
def context1(soliton1):
    return SolverContext(soliton1)


@pytest.fixture(scope="session")
def context3(soliton3):
    return SolverContext(soliton3)


def make_config(s=0.75, c=8.0, p=3.0, dim=1, points=1024, radius=40.0, **kwargs):
    return SolveConfig(params=SymbolParams(s=s, c=c), p=p, dim=dim, points=points, radius=radius, **kwargs)


@pytest.fixture
def solve_config():
    return make_config
