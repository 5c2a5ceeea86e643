"""
Shared fixtures: seeded generators, small designs and the moment models used across modules
"""
import logging

import numpy as np
import pytest

from empirical import MomentFunction, MomentModel
from simulation import generate_concentrations
from weights import ConcentrationMatrix, WeightArray

SEED = 20150204


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def design_4x2():
    """The 4 x 2 design with a hand-invertible Gram matrix"""
    return ConcentrationMatrix(np.array([[0.6, 0.4], [0.3, 0.7], [0.5, 0.5], [0.8, 0.2]]))


@pytest.fixture
def random_design(rng):
    def make(n, m):
        return generate_concentrations(n, m, rng)
    return make


@pytest.fixture
def signed_weights():
    """The (2, 2, -1) weights on x = (1, 2, 3): raw ECDF leaves [0, 1]"""
    x = np.array([1.0, 2.0, 3.0])
    return x, WeightArray(w=np.array([2.0, 2.0, -1.0]), component_index=0)


@pytest.fixture
def powers_model():
    """g(x) = (x, x^2) on both components of a two-component mixture"""
    def powers(t):
        return np.column_stack([t, t ** 2])
    return MomentModel((MomentFunction("(x,x^2)@1", powers, 2, 0),
                        MomentFunction("(x,x^2)@2", powers, 2, 1)))




@pytest.fixture(autouse=True)
def _drop_app_log_handlers():
    """setup_logging() installs root handlers bound to the captured streams of one test"""
    yield
    root = logging.getLogger()
    for handler in root.handlers[:]:
        if type(handler) in (logging.StreamHandler, logging.FileHandler):
            root.removeHandler(handler)
            handler.close()
