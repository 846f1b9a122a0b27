"""Two-stage training orchestration.

Stage 1 establishes locomotion with the exoskeleton clamped; stage 2 either
hands the exo channels to the policy (assisted condition) or keeps the clamp
(matched baseline) for an identical number of environment steps.  The
learning rate decays linearly to zero within each stage and resets at the
boundary.  A fixed seed with a single worker reproduces runs byte for byte;
results are worker-count independent because transitions are aggregated in
environment order.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curriculum import CurriculumContext, update_difficulty
from .replay import ReplayBuffer
from .rng import substream
from .sac import AgentHyper, SacAgent
from .netcore import OptimState, load_arrays, load_net, save_arrays, save_net


class TrainingUnstable(RuntimeError):
    pass


@dataclass
class SacConfig:
    gamma: float = 0.99
    tau_target: float = 0.005
    batch_size: int = 256
    replay_capacity: int = 1_000_000
    init_temperature: float = 0.1
    target_entropy: float | None = None
    n_envs: int = 8
    stage1_steps: int = 2_000_000
    stage2_steps: int = 2_000_000
    lr_stage1: float = 1e-3
    lr_stage2: float = 5e-4
    update_every: int = 1          # env steps per gradient update
    warmup_steps: int = 2000
    actor_hidden: tuple = (128, 128, 64)
    critic_hidden: tuple = (128, 128, 64)
    checkpoint_every: int = 500_000
    nonfinite_budget: int = 50

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.tau_target <= 1:
            raise ValueError("tau_target must lie in (0, 1]")
        if self.stage1_steps < 0 or self.stage2_steps <= 0:
            raise ValueError("stage budgets must be positive")

    @property
    def total_steps(self) -> int:
        return self.stage1_steps + self.stage2_steps


def lr_at(cfg: SacConfig, env_step: int) -> float:
    """Piecewise-linear schedule: lr1 -> 0 over stage 1, reset to lr2 -> 0."""
    if env_step < cfg.stage1_steps:
        return cfg.lr_stage1 * (1.0 - env_step / cfg.stage1_steps)
    s = env_step - cfg.stage1_steps
    return cfg.lr_stage2 * max(0.0, 1.0 - s / cfg.stage2_steps)


def stage_at(cfg: SacConfig, env_step: int, condition: str) -> str:
    if env_step < cfg.stage1_steps:
        return "1"
    return "2a" if condition == "exo" else "2b"


# -- checkpointing ------------------------------------------------------------

def _rng_state(rng: np.random.Generator):
    return rng.bit_generator.state

def _set_rng_state(rng: np.random.Generator, state) -> None:
    rng.bit_generator.state = state


def save_checkpoint(path, agent: SacAgent, trainer_state: dict) -> None:
    os.makedirs(path, exist_ok=True)
    save_net(os.path.join(path, "actor.net"), agent.actor)
    save_net(os.path.join(path, "critic1.net"), agent.critic1)
    save_net(os.path.join(path, "critic2.net"), agent.critic2)
    save_net(os.path.join(path, "target1.net"), agent.target1)
    save_net(os.path.join(path, "target2.net"), agent.target2)
    for name, opt in (("actor", agent.opt_actor), ("critic1", agent.opt_c1),
                      ("critic2", agent.opt_c2), ("alpha", agent.opt_alpha)):
        save_arrays(os.path.join(path, f"{name}.optim"), "optim",
                    opt.m + opt.v, meta={"step": opt.step, "lr": opt.lr})
    save_arrays(os.path.join(path, "alpha.net"), "alpha",
                [agent.log_alpha], meta={})
    with open(os.path.join(path, "trainer_state.json"), "w") as f:
        json.dump(trainer_state, f, sort_keys=True, default=str)


def load_checkpoint(path, agent: SacAgent) -> dict:
    agent.actor, _ = load_net(os.path.join(path, "actor.net"))
    agent.critic1, _ = load_net(os.path.join(path, "critic1.net"))
    agent.critic2, _ = load_net(os.path.join(path, "critic2.net"))
    agent.target1, _ = load_net(os.path.join(path, "target1.net"))
    agent.target2, _ = load_net(os.path.join(path, "target2.net"))
    _, arrays, _ = load_arrays(os.path.join(path, "alpha.net"))
    agent.log_alpha = arrays[0].astype(np.float64)
    for name, net_params, attr in (
            ("actor", agent.actor.params, "opt_actor"),
            ("critic1", agent.critic1.params, "opt_c1"),
            ("critic2", agent.critic2.params, "opt_c2"),
            ("alpha", [agent.log_alpha], "opt_alpha")):
        _, arrays, header = load_arrays(os.path.join(path, f"{name}.optim"))
        n = len(arrays) // 2
        opt = OptimState(lr=header["meta"]["lr"], step=header["meta"]["step"],
                         m=[a.astype(p.dtype) for a, p in zip(arrays[:n], net_params)],
                         v=[a.astype(p.dtype) for a, p in zip(arrays[n:], net_params)])
        setattr(agent, attr, opt)
    with open(os.path.join(path, "trainer_state.json")) as f:
        return json.load(f)


# -- metrics ------------------------------------------------------------------

METRIC_COLUMNS = (
    "env_step", "episode", "stage", "slope_deg", "target_speed",
    "episode_return", "episode_len", "lr", "temperature",
    "r_vel", "r_eff", "r_rom", "r_sm", "r_knee", "fell",
    "exo_abs_mean", "critic1_loss", "critic2_loss", "actor_loss",
)


class _EpisodeAccumulator:
    def __init__(self):
        self.reset()

    def reset(self):
        self.ret = 0.0
        self.len = 0
        self.terms = {"vel": 0.0, "eff": 0.0, "rom": 0.0, "sm": 0.0, "knee": 0.0}
        self.exo_abs = 0.0

    def add(self, reward, info):
        self.ret += reward
        self.len += 1
        for k in self.terms:
            self.terms[k] += info["reward_terms"].get(k, 0.0) \
                if "reward_terms" in info else 0.0
        exo = info.get("exo_torque")
        if exo is not None:
            self.exo_abs += float(np.mean(np.abs(exo)))


def train(cfg: SacConfig, condition: str, env_factory, out_dir: str,
          seed: int, workers: int = 1, resume: bool = False,
          hooks=None) -> dict:
    """Run the full two-stage curriculum for one condition ("exo"|"noexo").

    `env_factory(rng)` builds one environment instance.  Returns a summary
    dict; artifacts (checkpoints, metrics.csv, summary.txt) are written under
    `out_dir`.
    """
    if condition not in ("exo", "noexo"):
        raise ValueError("condition must be 'exo' or 'noexo'")
    os.makedirs(out_dir, exist_ok=True)

    env_rngs = [substream(seed, f"env/{i}") for i in range(cfg.n_envs)]
    act_rngs = [substream(seed, f"env/{i}/action") for i in range(cfg.n_envs)]
    trainer_rng = substream(seed, "trainer")
    envs = [env_factory(r) for r in env_rngs]
    obs_dim, action_dim = envs[0].obs_dim, envs[0].action_dim

    agent = SacAgent(obs_dim, action_dim,
                     AgentHyper(gamma=cfg.gamma, tau_target=cfg.tau_target,
                                init_temperature=cfg.init_temperature,
                                target_entropy=cfg.target_entropy,
                                actor_hidden=tuple(cfg.actor_hidden),
                                critic_hidden=tuple(cfg.critic_hidden),
                                lr=cfg.lr_stage1),
                     rng=substream(seed, "agentinit"))
    buffer = ReplayBuffer(cfg.replay_capacity, obs_dim, action_dim)
    ctx = CurriculumContext(stage="1" if cfg.stage1_steps > 0
                            else stage_at(cfg, cfg.stage1_steps, condition))

    env_steps = 0
    episode = 0
    nonfinite = 0
    losses = {"critic1": float("nan"), "critic2": float("nan"),
              "actor": float("nan")}

    metrics_path = os.path.join(out_dir, "metrics.csv")
    if resume:
        latest = latest_checkpoint(out_dir)
        if latest is None:
            raise FileNotFoundError(f"no checkpoint to resume in {out_dir}")
        state = load_checkpoint(latest, agent)
        env_steps = state["env_steps"]
        episode = state["episode"]
        nonfinite = state["nonfinite"]
        ctx.stage = state["ctx"]["stage"]
        ctx.scores = np.asarray(state["ctx"]["scores"], dtype=float)
        ctx.speed_index = state["ctx"]["speed_index"]
        _set_rng_state(trainer_rng, state["rng"]["trainer"])
        for i in range(cfg.n_envs):
            _set_rng_state(env_rngs[i], state["rng"][f"env{i}"])
            _set_rng_state(act_rngs[i], state["rng"][f"act{i}"])
        _truncate_metrics(metrics_path, env_steps)
        mode = "a"
    else:
        mode = "w"

    metrics = open(metrics_path, mode, newline="")
    if mode == "w":
        metrics.write(",".join(METRIC_COLUMNS) + "\n")

    accs = [_EpisodeAccumulator() for _ in range(cfg.n_envs)]
    cur_obs = [None] * cfg.n_envs
    pending_reset = [True] * cfg.n_envs
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    next_ckpt = ((env_steps // cfg.checkpoint_every) + 1) * cfg.checkpoint_every

    def checkpoint(tag=None):
        name = tag or f"ckpt_{env_steps:010d}"
        state = {
            "env_steps": env_steps, "episode": episode, "nonfinite": nonfinite,
            "condition": condition,
            "ctx": {"stage": ctx.stage, "scores": list(map(float, ctx.scores)),
                    "speed_index": ctx.speed_index},
            "rng": {"trainer": _rng_json(trainer_rng),
                    **{f"env{i}": _rng_json(env_rngs[i]) for i in range(cfg.n_envs)},
                    **{f"act{i}": _rng_json(act_rngs[i]) for i in range(cfg.n_envs)}},
        }
        save_checkpoint(os.path.join(out_dir, name), agent, state)
        return name

    try:
        while env_steps < cfg.total_steps:
            new_stage = stage_at(cfg, env_steps, condition)
            if new_stage != ctx.stage:
                checkpoint("ckpt_stage1_final")
                ctx.stage = new_stage
                # force fresh episodes under the new stage flag
                for i in range(cfg.n_envs):
                    pending_reset[i] = True
            agent.set_lr(lr_at(cfg, env_steps))

            for i in range(cfg.n_envs):
                if pending_reset[i]:
                    cur_obs[i] = envs[i].reset(ctx)
                    accs[i].reset()
                    pending_reset[i] = False

            actions = [agent.sample_action(cur_obs[i], act_rngs[i])
                       for i in range(cfg.n_envs)]
            if pool is not None:
                results = list(pool.map(
                    lambda t: t[0].step(t[1]), zip(envs, actions)))
            else:
                results = [envs[i].step(actions[i]) for i in range(cfg.n_envs)]

            for i, (obs2, reward, done, info) in enumerate(results):
                fell = bool(info.get("fell", False))
                buffer.add(cur_obs[i], actions[i], reward, obs2, fell)
                accs[i].add(reward, info)
                cur_obs[i] = obs2
                if info.get("nonfinite"):
                    nonfinite += 1
                    if nonfinite > cfg.nonfinite_budget:
                        raise TrainingUnstable(
                            f"{nonfinite} non-finite episodes exceed budget")
                if done:
                    episode += 1
                    if "slope_index" in info:
                        update_difficulty(ctx, info["slope_index"], fell)
                    a = accs[i]
                    n = max(a.len, 1)
                    row = (env_steps + i + 1, episode, ctx.stage,
                           info.get("slope_deg", 0.0),
                           info.get("target_speed", 0.0),
                           a.ret, a.len, lr_at(cfg, env_steps),
                           agent.temperature,
                           a.terms["vel"] / n, a.terms["eff"] / n,
                           a.terms["rom"] / n, a.terms["sm"] / n,
                           a.terms["knee"] / n, int(fell), a.exo_abs / n,
                           losses["critic1"], losses["critic2"],
                           losses["actor"])
                    metrics.write(",".join(repr(x) if isinstance(x, float)
                                           else str(x) for x in row) + "\n")
                    pending_reset[i] = True
            env_steps += cfg.n_envs

            if env_steps >= cfg.warmup_steps and buffer.size >= cfg.batch_size:
                n_updates = max(1, cfg.n_envs // cfg.update_every)
                for _ in range(n_updates):
                    losses = agent.update_from_buffer(
                        buffer, cfg.batch_size, trainer_rng)

            if hooks and "on_step" in hooks:
                hooks["on_step"](env_steps, agent)
            if env_steps >= next_ckpt:
                checkpoint()
                next_ckpt += cfg.checkpoint_every
    finally:
        metrics.flush()
        metrics.close()
        if pool is not None:
            pool.shutdown()

    final = checkpoint("ckpt_final")
    summary = {
        "condition": condition, "env_steps": env_steps, "episodes": episode,
        "nonfinite_episodes": nonfinite, "final_checkpoint": final,
        "temperature": agent.temperature,
    }
    with open(os.path.join(out_dir, "summary.txt"), "w") as f:
        for k, v in summary.items():
            f.write(f"{k}: {v}\n")
    return summary


def _rng_json(rng):
    state = rng.bit_generator.state
    return json.loads(json.dumps(state, default=int))


def latest_checkpoint(out_dir: str):
    """Checkpoint directory with the largest recorded env step count."""
    best = None
    for d in sorted(os.listdir(out_dir)):
        p = os.path.join(out_dir, d)
        meta = os.path.join(p, "trainer_state.json")
        if d.startswith("ckpt_") and os.path.exists(meta):
            with open(meta) as f:
                steps = json.load(f)["env_steps"]
            if best is None or steps >= best[0]:
                best = (steps, p)
    return best[1] if best else None


def _truncate_metrics(path, env_steps: int) -> None:
    """Drop metric rows beyond the checkpoint so a resumed log has no overlap."""
    if not os.path.exists(path):
        with open(path, "w", newline="") as f:
            f.write(",".join(METRIC_COLUMNS) + "\n")
        return
    with open(path) as f:
        lines = f.readlines()
    kept = lines[:1]
    for line in lines[1:]:
        try:
            if int(line.split(",", 1)[0]) <= env_steps:
                kept.append(line)
        except ValueError:
            continue
    with open(path, "w", newline="") as f:
        f.writelines(kept)


def evaluate(agent: SacAgent, env_factory, n_episodes: int, seed: int,
             ctx: CurriculumContext | None = None) -> list:
    """Deterministic-policy episode returns."""
    returns = []
    for ep in range(n_episodes):
        env = env_factory(substream(seed, f"eval/{ep}"))
        ctx_local = ctx or CurriculumContext()
        obs = env.reset(ctx_local)
        total = 0.0
        done = False
        while not done:
            a = agent.sample_action(obs, None, deterministic=True)
            obs, r, done, _ = env.step(a)
            total += r
        returns.append(total)
    return returns
