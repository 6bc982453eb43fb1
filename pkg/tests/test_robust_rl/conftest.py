import numpy as np
import pytest

from antifragile_rl.environment import OBS_DIM, make_env
from antifragile_rl.robust_rl import Batch, ReplayBuffer, TrainingConfig


@pytest.fixture
def tiny_config():
    """A few short episodes on narrow networks."""
    return TrainingConfig(episodes=3, exploration_episodes=1, batch_size=16,
                          buffer_capacity=500, hidden_units=8)


@pytest.fixture
def short_env():
    return make_env("training", seed=0, max_steps=30)


@pytest.fixture
def random_batch(rng):
    n = 8
    return Batch(
        obs=rng.normal(size=(n, OBS_DIM)),
        actions=rng.uniform([0.1, 0.1, 0.0], [3.0, 3.0, 6.0], size=(n, 3)),
        rewards=rng.normal(size=n),
        next_obs=rng.normal(size=(n, OBS_DIM)),
        dones=np.array([0.0, 1.0] * (n // 2)),
    )


@pytest.fixture
def filled_buffer(rng):
    buffer = ReplayBuffer(OBS_DIM, 3, capacity=200)
    for _ in range(64):
        buffer.add(rng.normal(size=OBS_DIM), rng.uniform(0.1, 3.0, size=3),
                   float(rng.normal()), rng.normal(size=OBS_DIM), False)
    return buffer
