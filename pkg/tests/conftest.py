import numpy as np
import pytest

from dicot.schemas import EncoderConfig, SyntheticSpec
from dicot.services import data_service


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_encoder():
    return EncoderConfig(in_channels=2, channels=[4, 4], kernel_sizes=[3, 3], embed_dim=4)


@pytest.fixture
def small_synthetic():
    spec = SyntheticSpec(n_per_class=20, T=32, D=2, C=2, noise_sigma=0.1, seed=3)
    return data_service.gen_synthetic(spec)


@pytest.fixture
def blobs(rng):
    """Two well separated 2-D clusters, 30 points each."""
    a = rng.normal(-5.0, 0.5, size=(30, 2))
    b = rng.normal(5.0, 0.5, size=(30, 2))
    values = np.vstack([a, b])
    labels = np.repeat([0, 1], 30)
    return values, labels
