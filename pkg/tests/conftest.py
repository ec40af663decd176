import numpy as np
import pytest

from core import logger
from fkwc.fdata import FunctionalDataset, Grid
from fkwc.sim import fourier_basis


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    """Keep JSON event logs out of the working tree"""
    path = tmp_path / "logs"
    monkeypatch.setattr(logger, "LOGS_DIR", path)
    return path


@pytest.fixture
def grid():
    return Grid(21)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_curves(rng, n, grid, size=5, scale=1.0):
    """Random curves from a few Fourier components; values are distinct almost surely"""
    return scale * rng.standard_normal((n, size)) @ fourier_basis(grid, size)


@pytest.fixture
def three_groups(rng, grid):
    samples = [smooth_curves(rng, 12, grid, scale=s) for s in (1.0, 1.5, 0.7)]
    return FunctionalDataset.from_groups(samples, grid)


@pytest.fixture
def two_groups(rng, grid):
    samples = [smooth_curves(rng, 15, grid), smooth_curves(rng, 15, grid, scale=2.0)]
    return FunctionalDataset.from_groups(samples, grid)
