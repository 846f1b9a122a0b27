"""Fixed-capacity circular replay store for off-policy training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BufferTooSmall(RuntimeError):
    pass


@dataclass
class Batch:
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray


class ReplayBuffer:
    """Circular transition store; the done flag excludes bootstrapping.

    Time-limit truncations should be stored with done=0 so the target value
    still bootstraps; only true terminal states (falls) use done=1.
    """

    def __init__(self, capacity: int, obs_dim: int, action_dim: int,
                 dtype=np.float32):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.action = np.zeros((capacity, action_dim), dtype=dtype)
        self.reward = np.zeros(capacity, dtype=dtype)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.done = np.zeros(capacity, dtype=dtype)
        self.cursor = 0
        self.size = 0

    def add(self, obs, action, reward, next_obs, done) -> None:
        i = self.cursor
        self.obs[i] = obs
        self.action[i] = action
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size < batch_size:
            raise BufferTooSmall(f"buffer holds {self.size} < batch {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(self.obs[idx], self.action[idx], self.reward[idx],
                     self.next_obs[idx], self.done[idx])
