import numpy as np
import pytest

from src.config.settings import SynthConfig
from src.models.image_models import GrayImage


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_image(rng):
    return GrayImage(rng.random((16, 16)))


@pytest.fixture
def small_synth():
    """Small captures keep decomposition fast while keeping the dataset grid intact."""
    return SynthConfig(n_subjects=10, width=64, height=48, vein_width=(1.0, 2.0), seed=7)
