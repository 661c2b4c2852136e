from __future__ import annotations

import numpy as np
import pytest

from penalmhd.grid import Grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def grid8():
    return Grid(8, 1.0)


@pytest.fixture
def grid16():
    return Grid(16, 1.0)
