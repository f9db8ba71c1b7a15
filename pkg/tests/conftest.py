import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from opcorona.disk import DiskGrid  # noqa: E402
from opcorona.field import AnalyticMatrixField  # noqa: E402


@pytest.fixture(scope="session")
def grid():
    return DiskGrid()


@pytest.fixture(scope="session")
def small_grid():
    return DiskGrid(32, 128)


@pytest.fixture(scope="session")
def zhalf():
    return AnalyticMatrixField([[[0.0], [0.5]], [[1.0], [0.0]]])


@pytest.fixture(scope="session")
def const_col():
    return AnalyticMatrixField.constant([[1.0], [0.0]])


@pytest.fixture(scope="session")
def row_field():
    """F(z) = [[1, z], [0, 0]]: rank one with a moving kernel."""
    return AnalyticMatrixField([[[1, 0], [0, 0]], [[0, 1], [0, 0]]])


@pytest.fixture(scope="session")
def diag_1_z():
    return AnalyticMatrixField([[[1, 0], [0, 0]], [[0, 0], [0, 1]]])


@pytest.fixture(scope="session")
def zhalf_pipeline(zhalf, grid):
    from opcorona.hankel import run_pipeline

    return run_pipeline(zhalf, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
