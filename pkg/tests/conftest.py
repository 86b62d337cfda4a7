import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def toy():
    """n=5 frozen toy regression used by the conditional oracles."""
    from csmsn.mcmc import RegressionData

    X = np.column_stack([np.ones(5), [-1.2, -0.4, 0.1, 0.7, 1.5]])
    y = np.array([-0.3, 0.8, 1.1, 2.9, 3.6])
    return RegressionData(y, X)
