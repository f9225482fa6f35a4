import numpy as np
import pytest

from rcplab import laws


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(params=["exp", "weibull", "uniform", "pareto"])
def continuous_law(request):
    return {
        "exp": laws.Exponential(1.3),
        "weibull": laws.Weibull(0.7, 1.2),
        "uniform": laws.UniformBounded(2.0),
        "pareto": laws.Pareto(2.5, 0.8),
    }[request.param]
