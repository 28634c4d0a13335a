import numpy as np
import pytest

from gaitkit.optimize import load_or_default_policy
from gaitkit.pattern import StyleParams
from gaitkit.simulator import SimConfig


class FixedCommandPolicy:
    """Constant (mu, omega) command, the simplest closed-loop stand-in."""

    def __init__(self, mu=1.5, omega=2.0):
        self.action = np.concatenate([np.full(4, mu), np.full(4, omega)])

    def act(self, obs):
        return self.action


@pytest.fixture(scope="session")
def baseline_policy():
    return load_or_default_policy()


@pytest.fixture
def kin_cfg():
    return SimConfig(mode="kinematic", seed=7, episode_s=5.0)


@pytest.fixture
def dyn_cfg():
    return SimConfig(mode="dynamic", seed=7, episode_s=5.0)


@pytest.fixture
def default_style():
    return StyleParams()
