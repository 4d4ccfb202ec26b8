import numpy as np
import pytest

import perflow as pf


@pytest.fixture(scope="session")
def bump_model():
    return pf.BernoulliSquaredModel(shift=pf.bump_shift())


@pytest.fixture(scope="session")
def quadratic_model():
    # p == 0 kills the shift entirely: diagonal risk x^2/2, both fields -x
    return pf.BernoulliSquaredModel(shift=pf.constant_shift(0.0))


@pytest.fixture(scope="session")
def half_model():
    # p == 0.5: shift-blind field -(x - 1/2), globally contracting
    return pf.BernoulliSquaredModel(shift=pf.constant_shift(0.5))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
