import numpy as np
import pytest

from relusmooth.data import generate_dataset
from relusmooth.nn import SgdConfig, init_network, train

MOONS_DATA_SEED = 3
MOONS_MODEL_SEED = 5
BLOBS_DATA_SEED = 2
BLOBS_MODEL_SEED = 4


@pytest.fixture(scope="session")
def moons_data():
    return generate_dataset("moons", 500, 0.05, seed=MOONS_DATA_SEED)


@pytest.fixture(scope="session")
def moons_model(moons_data):
    """Seeded 2-32-2 moons classifier shared by the attack/defense tests."""
    net = init_network((2, 32, 2), seed=MOONS_MODEL_SEED, biased=True)
    cfg = SgdConfig(epochs=400, learning_rate=0.5, momentum=0.9, seed=MOONS_MODEL_SEED)
    return train(net, moons_data.inputs, moons_data.labels, cfg)


@pytest.fixture(scope="session")
def blobs_data():
    return generate_dataset("blobs", 200, 0.1, seed=BLOBS_DATA_SEED)


@pytest.fixture(scope="session")
def blobs_model(blobs_data):
    net = init_network((2, 16, 2), seed=BLOBS_MODEL_SEED, biased=True)
    cfg = SgdConfig(epochs=200, learning_rate=0.5, momentum=0.9, seed=BLOBS_MODEL_SEED)
    return train(net, blobs_data.inputs, blobs_data.labels, cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
