import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from edgeoffload.model import generate_instances

settings.register_profile(
    "edgeoffload",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("edgeoffload")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_instances(n_vehicles, n_instances, seed=0, ranges=None):
    return generate_instances(n_vehicles, n_instances, ranges, seed=seed)
