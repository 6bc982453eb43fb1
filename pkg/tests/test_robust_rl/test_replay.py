"""
Tests for the replay buffer.
"""

import numpy as np
import pytest

from antifragile_rl.robust_rl import Experience, ReplayBuffer


def transition(i):
    return np.full(2, float(i)), np.full(1, float(i)), float(i), np.full(2, i + 0.5), i % 2 == 1


class TestExperience:

    def test_coerces_types(self):
        exp = Experience([1, 2], [3], 1, [4, 5], 0)
        assert exp.obs.dtype == float
        assert exp.reward == 1.0
        assert exp.done is False

    @pytest.mark.parametrize("field", ["obs", "action", "next_obs", "reward"])
    def test_rejects_non_finite(self, field):
        values = {"obs": [0.0], "action": [0.0], "reward": 0.0, "next_obs": [0.0], "done": False}
        values[field] = float("nan") if field == "reward" else [np.nan]
        with pytest.raises(ValueError):
            Experience(**values)


class TestReplayBuffer:

    def test_add_and_get(self):
        buffer = ReplayBuffer(2, 1, capacity=10)
        for i in range(3):
            buffer.add(*transition(i))
        assert len(buffer) == 3
        exp = buffer.get(1)
        np.testing.assert_array_equal(exp.obs, [1.0, 1.0])
        assert exp.reward == 1.0
        assert exp.done is True

    def test_fifo_eviction(self):
        buffer = ReplayBuffer(2, 1, capacity=4)
        for i in range(7):
            buffer.add(*transition(i))
        assert len(buffer) == 4
        assert buffer.is_full
        assert [buffer.get(k).reward for k in range(4)] == [3.0, 4.0, 5.0, 6.0]

    def test_grows_past_first_chunk(self):
        buffer = ReplayBuffer(2, 1, capacity=10_000)
        for i in range(5000):
            buffer.add(*transition(i))
        assert len(buffer) == 5000
        assert buffer.get(0).reward == 0.0
        assert buffer.get(4999).reward == 4999.0

    def test_add_experience(self):
        buffer = ReplayBuffer(2, 1, capacity=3)
        buffer.add_experience(Experience(*transition(2)))
        assert buffer.get(0).reward == 2.0

    def test_sample_without_replacement(self, rng):
        buffer = ReplayBuffer(2, 1, capacity=50)
        for i in range(20):
            buffer.add(*transition(i))
        batch = buffer.sample(20, rng)
        assert len(batch) == 20
        assert sorted(batch.rewards) == [float(i) for i in range(20)]
        np.testing.assert_array_equal(batch.obs[:, 0], batch.rewards)
        assert set(batch.dones) == {0.0, 1.0}

    def test_sample_too_many(self, rng):
        buffer = ReplayBuffer(2, 1, capacity=5)
        buffer.add(*transition(0))
        with pytest.raises(ValueError):
            buffer.sample(2, rng)

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            ReplayBuffer(2, 1, capacity=5).get(0)

    def test_clear(self):
        buffer = ReplayBuffer(2, 1, capacity=5)
        buffer.add(*transition(0))
        buffer.clear(capacity=2)
        assert len(buffer) == 0
        assert buffer.capacity == 2

    def test_invalid_capacity(self):
        with pytest.raises(ValueError):
            ReplayBuffer(2, 1, capacity=0)
