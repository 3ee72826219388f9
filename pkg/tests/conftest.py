import numpy as np
import pytest
from hypothesis import settings

from rodchaos.model import DimensionlessParameters

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")

# parameter sets used across the suite
SECTION_PARAMS = DimensionlessParameters(m=1.7, gamma=3.0, delta=3.0, lambda_bar=0.135, mu=0.4)
SECTION_LEVEL = 0.9
SECTION_START = (0.1, 0.0, 0.5)
INTEGRABLE_PARAMS = DimensionlessParameters(m=1.7, gamma=3.0, delta=3.0, lambda_bar=0.0, mu=0.4)
INTEGRABLE_LEVEL = 1.2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
