import math

import pytest
from hypothesis import HealthCheck, settings

from helpers import CRUISE, FRONT_TOUCH, config, spec

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def head_on():
    """Two front-touch agents driving straight at each other."""
    rules = [("front", "==", True, "HIT")]
    a = spec("a", 3.0, 5.0, 0.0, CRUISE, devices=FRONT_TOUCH, thresholds=rules)
    b = spec("b", 7.0, 5.0, math.pi, CRUISE, devices=FRONT_TOUCH, thresholds=rules)
    return config([a, b], max_ticks=200)
