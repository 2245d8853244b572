import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from regioncert import Network

settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def hand_net():
    """2-2-2 net whose geometry is known in closed form.

    Hidden planes x1 = 0.3 and x2 = 0.8; class-0 logit doubles the first
    hidden unit, class-1 logit is the constant 0.1.
    """
    return Network(
        weights=(np.array([[1.0, 0.0], [0.0, 1.0]]),
                 np.array([[2.0, 0.0], [0.0, 0.0]])),
        biases=(np.array([-0.3, -0.8]), np.array([0.0, 0.1])),
    )


@pytest.fixture
def hand_x():
    return np.array([0.6, 0.5])


@pytest.fixture
def three_region_net():
    """Effectively 1D net with three regions along x1.

    Hidden planes x1 = -5 (always active inside the unit box), x1 = 0.3,
    x1 = 0.2.  The class-0 logit equals x1 - 0.15 for x1 < 0.3 and has
    slope 0.5 above; class 1 is constant 0.  From x = (0.6, 0.5) the
    nearest misclassified point is (0.15, 0.5), two regions away.
    """
    return Network(
        weights=(np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]),
                 np.array([[1.0, -0.5, 0.0], [0.0, 0.0, 0.0]])),
        biases=(np.array([5.0, -0.3, -0.2]), np.array([-5.15, 0.0])),
    )


def random_net(rng, input_dim=2, hidden_dims=(5,), num_classes=2, scale=1.0):
    from regioncert import random_network
    return random_network(rng, input_dim, list(hidden_dims), num_classes, scale)
