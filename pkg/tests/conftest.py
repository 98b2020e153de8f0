"""Shared fixtures: a hand-built linear model, a random sPHNN and a small linear dataset"""

import numpy as np
import pytest

from sphs.calculators.generators import gen_linear_phs
from sphs.models.phs import ModelSpec, build_model
from sphs.utils.numerics import softplus_inverse

LINEAR_DAMPING = 0.1


def make_linear_model(damping=LINEAR_DAMPING, input_dim=1):
    """
    sPHNN whose parameters reproduce H = 1/2 |x|², J = [[0, -1], [1, 0]],
    R = damping * I and G = (0, 1)^T
    """
    model = build_model(ModelSpec(kind="sphnn", state_dim=2, input_dim=input_dim, epsilon=0.5))
    params = model.params
    for name in model.layout.names:
        if name.startswith("H.ficnn"):
            params = params.replace_segment(name, np.zeros(model.layout[name].shape))
    params = params.replace_segment("J.raw", np.array([1.0]))
    diagonal = float(softplus_inverse(np.sqrt(damping)))
    params = params.replace_segment("R.raw", np.array([diagonal, 0.0, diagonal]))
    if input_dim:
        params = params.replace_segment("G.raw", np.array([0.0, 1.0]))
    model.params = params
    return model


@pytest.fixture
def linear_model():
    return make_linear_model()


@pytest.fixture
def unforced_linear_model():
    return make_linear_model(input_dim=0)


@pytest.fixture
def random_sphnn():
    return build_model(ModelSpec(kind="sphnn", state_dim=3, epsilon=1e-3, seed=1))


@pytest.fixture
def linear_dataset():
    return gen_linear_phs(n_traj=2, duration=4.0, dt=0.1, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
