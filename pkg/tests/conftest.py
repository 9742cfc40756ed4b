import numpy as np
import pytest

from hiwave import Field, GaussianMixture
from hiwave.denoise import AnalyticBackend
from hiwave.fields import Rng
from hiwave.pipeline import demo_backend


def rand_field(seed: int, channels: int = 3, height: int = 16, width: int = 16) -> Field:
    return Field(Rng(seed).normals(channels * height * width).reshape(channels, height, width))


@pytest.fixture(scope="session")
def backend() -> AnalyticBackend:
    return demo_backend()


@pytest.fixture(scope="session")
def tiny_backend() -> AnalyticBackend:
    """Two well-separated components on a small grid; fast to sample."""
    shape = (3, 8, 8)
    mu0 = Field(np.full(shape, 0.4, dtype=np.float32))
    mu1 = Field(np.full(shape, -0.4, dtype=np.float32))
    return AnalyticBackend(GaussianMixture([(0.6, mu0, 0.15), (0.4, mu1, 0.12)]))
