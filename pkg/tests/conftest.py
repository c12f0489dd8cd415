"""
Shared fixtures: coarse disk meshes and spaces
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path so that `src` is importable
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.fe.space import FeFunction, P2Space  # noqa: E402
from src.geometry.domain import DomainGeometry  # noqa: E402
from src.geometry.mesh import build_mesh  # noqa: E402
from src.operators.regularization import RegParams  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale runs (minutes)")


@pytest.fixture(scope='session')
def disk():
    return DomainGeometry.disk(1.0)


@pytest.fixture(scope='session')
def coarse_mesh(disk):
    return build_mesh(disk, 0.3)


@pytest.fixture(scope='session')
def coarse_space(coarse_mesh):
    return P2Space(coarse_mesh)


@pytest.fixture(scope='session')
def medium_space(disk):
    return P2Space(build_mesh(disk, 0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def random_vh(coarse_space, rng):
    """Random function in V_h with O(0.1) coefficients"""
    return FeFunction.from_interior(coarse_space, 0.1 * rng.normal(size=coarse_space.n_interior))


@pytest.fixture
def rp_default():
    return RegParams(epsilon=0.3, k=2.0)
