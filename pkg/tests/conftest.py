import numpy as np
import pytest

from kaczpr import Model, RngStream, make_ensemble
from kaczpr.rng import complex_standard_normal


def unit_signal(n, stream: RngStream):
    gen = stream.generator()
    x = complex_standard_normal(n, gen)
    return x / np.linalg.norm(x)


@pytest.fixture
def small_ensemble():
    return make_ensemble(24, 4, Model.UNIT_SPHERE, RngStream(100, 0))
