import numpy as np
import pytest

from mtt_fisher.rngstream import rng_stream


@pytest.fixture
def rng():
    return rng_stream(20240811, 0)


def make_rng(*ids):
    return rng_stream(20240811, *ids)


@pytest.fixture
def rng_factory():
    return make_rng


def trapezoid_integral(fn, lo, hi, n=200_001):
    x = np.linspace(lo, hi, n)
    return np.trapezoid(fn(x), x)
