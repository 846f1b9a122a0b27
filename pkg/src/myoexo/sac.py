"""Soft actor-critic agent: twin critics with targets, a squashed-Gaussian
actor, and automatic entropy temperature, all on the in-house gradient
engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .netcore import (
    DenseNet,
    OptimState,
    adam_step,
    gaussian_head_backward,
    gaussian_head_deterministic,
    gaussian_head_sample,
)
from .replay import Batch, BufferTooSmall, ReplayBuffer


def soft_update(target_params, online_params, tau: float):
    """Polyak averaging: target <- (1 - tau) * target + tau * online."""
    from .netcore import ShapeMismatch

    for t, o in zip(target_params, online_params):
        if t.shape != o.shape:
            raise ShapeMismatch(f"target {t.shape} vs online {o.shape}")
        t *= 1.0 - tau
        t += tau * o
    return target_params


@dataclass
class AgentHyper:
    gamma: float = 0.99
    tau_target: float = 0.005
    init_temperature: float = 0.1
    target_entropy: float | None = None     # default: -action_dim
    actor_hidden: tuple = (128, 128, 64)
    critic_hidden: tuple = (128, 128, 64)
    lr: float = 1e-3


class SacAgent:
    def __init__(self, obs_dim: int, action_dim: int,
                 hyper: AgentHyper | None = None,
                 rng: np.random.Generator | None = None):
        self.h = hyper or AgentHyper()
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        rng = rng or np.random.default_rng(0)

        self.actor = DenseNet([obs_dim, *self.h.actor_hidden, 2 * action_dim],
                              head="gauss", rng=rng)
        qin = obs_dim + action_dim
        self.critic1 = DenseNet([qin, *self.h.critic_hidden, 1], rng=rng)
        self.critic2 = DenseNet([qin, *self.h.critic_hidden, 1], rng=rng)
        self.target1 = DenseNet([qin, *self.h.critic_hidden, 1], rng=rng)
        self.target2 = DenseNet([qin, *self.h.critic_hidden, 1], rng=rng)
        for t, o in ((self.target1, self.critic1), (self.target2, self.critic2)):
            t.params = [p.copy() for p in o.params]
            t.bump_version()

        self.log_alpha = np.array([math.log(self.h.init_temperature)],
                                  dtype=np.float64)
        self.target_entropy = (self.h.target_entropy
                               if self.h.target_entropy is not None
                               else -float(action_dim))

        lr = self.h.lr
        self.opt_actor = OptimState.for_params(self.actor.params, lr=lr)
        self.opt_c1 = OptimState.for_params(self.critic1.params, lr=lr)
        self.opt_c2 = OptimState.for_params(self.critic2.params, lr=lr)
        self.opt_alpha = OptimState.for_params([self.log_alpha], lr=lr)

    # -- policy ----------------------------------------------------------

    @property
    def temperature(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def set_lr(self, lr: float) -> None:
        for opt in (self.opt_actor, self.opt_c1, self.opt_c2, self.opt_alpha):
            opt.lr = lr

    def sample_action(self, obs: np.ndarray, rng: np.random.Generator,
                      deterministic: bool = False) -> np.ndarray:
        out, _ = self.actor.forward(np.asarray(obs, dtype=np.float32)[None, :])
        if deterministic:
            return gaussian_head_deterministic(out)[0].astype(np.float64)
        eps = rng.standard_normal((1, self.action_dim))
        action, _, _ = gaussian_head_sample(out, eps)
        return action[0].astype(np.float64)

    # -- learning --------------------------------------------------------

    def _q(self, net, obs, action):
        x = np.concatenate([obs, action], axis=1, dtype=np.float32)
        q, cache = net.forward(x)
        return q[:, 0], cache

    def critic_targets(self, batch: Batch, rng: np.random.Generator) -> np.ndarray:
        """Soft Bellman backup with fresh next actions from the current actor."""
        out, _ = self.actor.forward(batch.next_obs)
        eps = rng.standard_normal((len(batch.reward), self.action_dim))
        a2, logp2, _ = gaussian_head_sample(out, eps)
        q1, _ = self._q(self.target1, batch.next_obs, a2.astype(np.float32))
        q2, _ = self._q(self.target2, batch.next_obs, a2.astype(np.float32))
        soft_q = np.minimum(q1, q2) - self.temperature * logp2
        return batch.reward + self.h.gamma * (1.0 - batch.done) * soft_q

    def update(self, batch: Batch, rng: np.random.Generator) -> dict:
        """One gradient step on both critics, the actor, and the temperature,
        followed by a target soft update.  Returns the loss scalars."""
        B = len(batch.reward)
        y = self.critic_targets(batch, rng)

        losses = {}
        for name, net, opt in (("critic1", self.critic1, self.opt_c1),
                               ("critic2", self.critic2, self.opt_c2)):
            q, cache = self._q(net, batch.obs, batch.action)
            err = q - y
            losses[name] = float(np.mean(err * err))
            gout = (2.0 / B) * err[:, None]
            grads, _ = net.backward(cache, gout.astype(np.float32))
            adam_step(net.params, grads, opt)
            net.bump_version()

        # actor: minimize alpha*logp - min(Q1, Q2) over reparameterized actions
        out, acache = self.actor.forward(batch.obs)
        eps = rng.standard_normal((B, self.action_dim))
        a, logp, hcache = gaussian_head_sample(out, eps)
        a32 = a.astype(np.float32)
        q1, c1cache = self._q(self.critic1, batch.obs, a32)
        q2, c2cache = self._q(self.critic2, batch.obs, a32)
        qmin = np.minimum(q1, q2)
        alpha = self.temperature
        losses["actor"] = float(np.mean(alpha * logp - qmin))

        pick1 = (q1 <= q2).astype(np.float32)[:, None]
        g1 = -pick1 / B
        g2 = -(1.0 - pick1) / B
        _, gin1 = self.critic1.backward(c1cache, g1)
        _, gin2 = self.critic2.backward(c2cache, g2)
        g_action = (gin1 + gin2)[:, self.obs_dim:].astype(np.float64)
        g_logp = np.full(B, alpha / B)
        g_out = gaussian_head_backward(hcache, g_action, g_logp)
        agrads, _ = self.actor.backward(acache, g_out.astype(np.float32))
        adam_step(self.actor.params, agrads, self.opt_actor)
        self.actor.bump_version()

        # temperature: optimized in log space toward the entropy target
        ent_gap = float(np.mean(logp + self.target_entropy))
        losses["temperature"] = -float(self.log_alpha[0]) * ent_gap
        adam_step([self.log_alpha], [np.array([-ent_gap])], self.opt_alpha)
        losses["alpha"] = self.temperature

        soft_update(self.target1.params, self.critic1.params, self.h.tau_target)
        soft_update(self.target2.params, self.critic2.params, self.h.tau_target)
        self.target1.bump_version()
        self.target2.bump_version()
        return losses

    def update_from_buffer(self, buffer: ReplayBuffer, batch_size: int,
                           rng: np.random.Generator) -> dict:
        if buffer.size < batch_size:
            raise BufferTooSmall(
                f"buffer holds {buffer.size} < batch {batch_size}")
        return self.update(buffer.sample(batch_size, rng), rng)
