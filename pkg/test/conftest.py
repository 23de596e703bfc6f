"""
Shared fixtures: tiny networks and codebooks.
"""

import numpy as np
import pytest

from src.pofsm.engine import build_flow_spec
from src.pofsm.services.flow_codec import FlowCodebook

from .helpers import tiny_classifier_spec


@pytest.fixture
def classifier_spec():
    return tiny_classifier_spec()


@pytest.fixture
def flow_spec():
    """desk-flow network with 3 clusters on 8x8 input."""
    return build_flow_spec("desk-flow", 3, input_dims=(8, 8, 3), width=4)


@pytest.fixture
def codebook3():
    """Three horizontal clusters: left, still, right."""
    return FlowCodebook(np.array([[-2.0, 0.0], [0.0, 0.0], [2.0, 0.0]]), f_max=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
