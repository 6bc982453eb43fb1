"""
Experience replay for the actor-critic trainers.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

DEFAULT_CAPACITY = 1_000_000
_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class Experience:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool

    def __post_init__(self):
        for name in ("obs", "action", "next_obs"):
            value = np.array(getattr(self, name), dtype=float).reshape(-1)
            if not np.all(np.isfinite(value)):
                raise ValueError(f"Experience {name} must be finite")
            object.__setattr__(self, name, value)
        if not np.isfinite(self.reward):
            raise ValueError("Experience reward must be finite")
        object.__setattr__(self, "reward", float(self.reward))
        object.__setattr__(self, "done", bool(self.done))


@dataclass(frozen=True, eq=False)
class Batch:
    """Column-stacked minibatch; ``dones`` holds 0.0 / 1.0."""

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


class ReplayBuffer:
    """
    FIFO ring of transitions.

    Storage grows in chunks up to ``capacity``; once full, each insertion
    evicts the oldest transition.
    """

    def __init__(self, obs_dim: int, action_dim: int, capacity: int = DEFAULT_CAPACITY):
        if capacity <= 0:
            raise ValueError(f"Capacity must be positive, got {capacity}")
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.capacity = int(capacity)
        self._size = 0
        self._next = 0
        self._allocate(min(self.capacity, _CHUNK))

    def _allocate(self, rows: int) -> None:
        old = getattr(self, "_obs", None)
        obs = np.zeros((rows, self.obs_dim))
        actions = np.zeros((rows, self.action_dim))
        rewards = np.zeros(rows)
        next_obs = np.zeros((rows, self.obs_dim))
        dones = np.zeros(rows)
        if old is not None:
            n = self._size
            obs[:n] = self._obs[:n]
            actions[:n] = self._actions[:n]
            rewards[:n] = self._rewards[:n]
            next_obs[:n] = self._next_obs[:n]
            dones[:n] = self._dones[:n]
        self._obs, self._actions, self._rewards = obs, actions, rewards
        self._next_obs, self._dones = next_obs, dones

    def __len__(self) -> int:
        return self._size

    @property
    def is_full(self) -> bool:
        return self._size == self.capacity

    def add(self, obs, action, reward: float, next_obs, done: bool) -> None:
        if self._next == len(self._rewards) and len(self._rewards) < self.capacity:
            self._allocate(min(self.capacity, 2 * len(self._rewards)))
        i = self._next
        self._obs[i] = obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_obs[i] = next_obs
        self._dones[i] = 1.0 if done else 0.0
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def add_experience(self, experience: Experience) -> None:
        self.add(experience.obs, experience.action, experience.reward,
                 experience.next_obs, experience.done)

    def get(self, index: int) -> Experience:
        """The ``index``-th oldest stored transition."""
        if not 0 <= index < self._size:
            raise IndexError(f"Index {index} out of range for {self._size} transitions")
        start = self._next if self.is_full else 0
        i = (start + index) % self.capacity
        return Experience(self._obs[i], self._actions[i], self._rewards[i],
                          self._next_obs[i], bool(self._dones[i]))

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform minibatch without replacement."""
        if batch_size > self._size:
            raise ValueError(f"Cannot sample {batch_size} transitions from {self._size}")
        idx = rng.choice(self._size, size=batch_size, replace=False)
        return Batch(self._obs[idx].copy(), self._actions[idx].copy(), self._rewards[idx].copy(),
                     self._next_obs[idx].copy(), self._dones[idx].copy())

    def clear(self, capacity: Optional[int] = None) -> None:
        if capacity is not None:
            self.capacity = int(capacity)
        self._size = 0
        self._next = 0
        self._obs = None
        self._allocate(min(self.capacity, _CHUNK))


__all__ = ["Experience", "Batch", "ReplayBuffer", "DEFAULT_CAPACITY"]
