import numpy as np
import pytest

from uradec.gfq import GfContext
from uradec.presets import build_code


@pytest.fixture(scope="session")
def gf64():
    return GfContext(6)


@pytest.fixture(scope="session")
def gf4():
    return GfContext(2)


@pytest.fixture(scope="session")
def tiny_code():
    """(H, gen) for the 12-slot, 8-check preset code over GF(64)."""
    return build_code(64, 12, 8, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
