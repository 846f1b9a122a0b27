"""One-degree-of-freedom torque-tracking environment.

A damped inertia must be steered to a per-episode random target angle.  Used
to validate trainer convergence cheaply, with the same step/reset interface
as the locomotion environment.
"""

from __future__ import annotations

import numpy as np


class ToyTorqueEnv:
    obs_dim = 3
    action_dim = 1

    def __init__(self, rng: np.random.Generator | None = None,
                 horizon: int = 200, dt: float = 0.05):
        self.rng = rng or np.random.default_rng(0)
        self.horizon = horizon
        self.dt = dt
        self.terminated = True

    def reset(self, ctx=None) -> np.ndarray:
        self.theta = float(self.rng.uniform(-1.0, 1.0))
        self.omega = 0.0
        self.target = float(self.rng.uniform(-1.0, 1.0))
        self.tick = 0
        self.terminated = False
        return self._obs()

    def _obs(self):
        return np.array([self.theta, self.omega, self.target])

    def step(self, action):
        if self.terminated:
            raise RuntimeError("episode is over; call reset")
        u = float(np.clip(np.asarray(action).reshape(-1)[0], -1.0, 1.0))
        self.omega += self.dt * (3.0 * u - 0.5 * self.omega)
        self.theta += self.dt * self.omega
        self.tick += 1
        err = self.theta - self.target
        reward = -(err * err) - 0.01 * u * u
        self.terminated = self.tick >= self.horizon
        # pure time limit: done never blocks bootstrapping
        return self._obs(), reward, self.terminated, {"fell": False,
                                                      "time_limit": True}
