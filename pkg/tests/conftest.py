import numpy as np
import pytest

from edgeburst import ModelParams


@pytest.fixture
def fig1_params():
    """Quench / correspondence parameter set (edge-burst regime)."""
    return ModelParams(t1=0.8, t2=1.0, gamma1=0.8, gamma_g=0.8, gamma_l=0.8,
                       L=60, x0=50)


@pytest.fixture
def fig2_params():
    """Scaling-relation parameter set (stronger skin localization)."""
    return ModelParams(t1=0.5, t2=1.0, gamma1=0.8, gamma_g=0.8, gamma_l=0.8,
                       L=60, x0=50)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
