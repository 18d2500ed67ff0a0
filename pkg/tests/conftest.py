import numpy as np
import pytest
from hypothesis import settings

from mgtlab.model import ModelParams, ModelVariant, Regime

settings.register_profile("mgtlab", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("mgtlab")

# one representative parameter set per (variant, regime) case
CASES = {
    "fourier-lt": (ModelParams(tau=0.5, beta=1.0, eta=0.3), ModelVariant.FOURIER, Regime.TAU_LESS_BETA),
    "fourier-eq": (ModelParams(tau=1.0, beta=1.0, eta=0.5), ModelVariant.FOURIER, Regime.TAU_EQUALS_BETA),
    "cattaneo-lt": (ModelParams(tau=0.5, beta=1.0, eta=0.5, tau0=0.2), ModelVariant.CATTANEO, Regime.TAU_LESS_BETA),
    "cattaneo-eq": (ModelParams(tau=1.0, beta=1.0, eta=0.5, tau0=0.2), ModelVariant.CATTANEO, Regime.TAU_EQUALS_BETA),
}


@pytest.fixture(params=sorted(CASES))
def case(request):
    return CASES[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
