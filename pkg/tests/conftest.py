import math

import numpy as np
import pytest

from robustfolio.market import build_market, one_period_market
from robustfolio.measures import prior_set
from robustfolio.utility import UtilityFunction


@pytest.fixture
def binary():
    """Delta S in {+1, -1} from S0 = 1."""
    return one_period_market([1.0], [[2.0], [0.0]])


@pytest.fixture
def flat():
    return one_period_market([1.0], [[1.0], [1.0]])


@pytest.fixture
def log_u():
    return UtilityFunction("log")


@pytest.fixture
def two_period():
    nodes = [
        {"id": "r", "parent": None, "prices": [100.0]},
        {"id": "u", "parent": "r", "prices": [110.0]},
        {"id": "d", "parent": "r", "prices": [90.0]},
        {"id": "uu", "parent": "u", "prices": [121.0]},
        {"id": "ud", "parent": "u", "prices": [99.0]},
        {"id": "du", "parent": "d", "prices": [99.0]},
        {"id": "dd", "parent": "d", "prices": [81.0]},
    ]
    return build_market(nodes)


def closed_form_value():
    """0.6 ln 1.2 + 0.4 ln 0.8, the log-optimal value for P = (0.6, 0.4)."""
    return 0.6 * math.log(1.2) + 0.4 * math.log(0.8)


UTILITIES = [UtilityFunction("log"), UtilityFunction("power", 0.5),
             UtilityFunction("power", 0.3), UtilityFunction("power", -1.0)]
