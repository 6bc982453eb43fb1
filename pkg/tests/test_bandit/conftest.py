import numpy as np
import pytest

from antifragile_rl.bandit import RewardSchedule
from antifragile_rl.environment import ACTION_HIGH, ACTION_LOW, OBS_DIM, make_env
from antifragile_rl.robust_rl import RobustPolicyPair
from antifragile_rl.shift import ShiftReport


@pytest.fixture
def canonical():
    return RewardSchedule.canonical()


@pytest.fixture
def two_arm():
    return RewardSchedule.stationary([0.9, 0.1], 2000)


@pytest.fixture
def arms():
    """Vanilla first, then two robust pairs."""
    return [RobustPolicyPair(OBS_DIM, 3, ACTION_LOW, ACTION_HIGH, alpha=alpha,
                             rng=np.random.default_rng(20 + i), hidden=8)
            for i, alpha in enumerate((0.0, 0.1, 0.3))]


@pytest.fixture
def calibration():
    return [
        ShiftReport(0.5, [0.4, 0.2, 0.1], [0.225, 0.45, 0.9]),
        ShiftReport(1.0, [0.8, 0.1, 0.3], [0.1125, 0.9, 0.3]),
    ]


@pytest.fixture
def eval_env():
    return make_env("training", seed=0, max_steps=20)
