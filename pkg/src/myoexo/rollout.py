"""Rollout recording shared by training evaluation, basis extraction, and
distillation: per-tick channels at the 40 Hz control rate plus per-substep
traces at the 200 Hz physics rate."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .curriculum import CurriculumContext


@dataclass
class RolloutLog:
    slope_deg: float
    target_speed: float            # nominal (first) target
    control_hz: float
    physics_hz: float
    fell: bool = False
    # per control tick
    t: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    reward_terms: list = field(default_factory=list)
    activations: list = field(default_factory=list)     # muscles + trunk pair
    grf: list = field(default_factory=list)             # (left_n, left_t, right_n, right_t)
    exo_cmd: list = field(default_factory=list)          # normalized, post rate limit
    exo_torque: list = field(default_factory=list)       # applied Nm at tick end
    bio_joint_torques: list = field(default_factory=list)
    joint_velocities: list = field(default_factory=list)
    com_speed: list = field(default_factory=list)        # along-slope
    target_speeds: list = field(default_factory=list)
    # per physics substep
    t_sub: list = field(default_factory=list)
    gyro_l: list = field(default_factory=list)
    gyro_r: list = field(default_factory=list)
    exo_torque_sub: list = field(default_factory=list)   # (2,) per substep
    exo_cmd_sub: list = field(default_factory=list)      # normalized command held
    # stride bookkeeping (tick indices); filled by the producer when it knows
    # the phase, otherwise left for GRF event detection
    stride_ticks: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def asarray(self, name):
        return np.asarray(getattr(self, name))

    @property
    def duration_s(self) -> float:
        return len(self.t) / self.control_hz


def policy_rollout(env, action_fn, max_ticks: int,
                   slope_deg: float, target_speed: float,
                   stage: str = "2a",
                   target_speed_fn=None) -> RolloutLog:
    """Roll a policy on a fixed condition and record everything.

    `action_fn(obs)` returns the action for one tick.  `target_speed_fn(t)`,
    when given, retargets the commanded speed each tick (varying-speed
    trials).
    """
    obs = env.reset_condition(slope_deg, target_speed, stage)
    log = RolloutLog(slope_deg, target_speed, env.cfg.control_hz,
                     env.cfg.physics_hz)
    for _ in range(max_ticks):
        if target_speed_fn is not None:
            env.target_speed = float(target_speed_fn(env.state.t))
        a = action_fn(obs)
        obs, reward, done, info = env.step(a)
        _record_tick(log, a, reward, info, env)
        if done:
            log.fell = bool(info.get("fell", False))
            break
    return log


def _record_tick(log: RolloutLog, action, reward, info, env):
    log.t.append(info["t"])
    log.actions.append(np.asarray(action, dtype=float))
    log.rewards.append(reward)
    log.reward_terms.append(dict(info["reward_terms"]))
    log.activations.append(info["activations"])
    snap = info.get("snapshot")
    log.com_speed.append(snap.forward_speed if snap is not None else 0.0)
    log.target_speeds.append(env.target_speed)
    fn_ft = _grf_from_obs(env)
    log.grf.append(fn_ft)
    log.exo_cmd.append(info["exo_cmd"])
    log.exo_torque.append(info["exo_torque"])
    log.bio_joint_torques.append(info["bio_joint_torques"])
    log.joint_velocities.append(info["joint_velocities"])
    log.t_sub.extend(info["t_substeps"].tolist())
    log.gyro_l.extend(info["gyro_l_substeps"].tolist())
    log.gyro_r.extend(info["gyro_r_substeps"].tolist())
    log.exo_torque_sub.extend([row.copy() for row in info["exo_torque_substeps"]])
    log.exo_cmd_sub.extend([np.asarray(info["exo_cmd"], dtype=float)]
                           * len(info["t_substeps"]))


def _grf_from_obs(env):
    from .dynamics import contact_forces

    left, right = contact_forces(env.state, env.model, env.terrain)
    return np.array([left[0], left[1], right[0], right[1]])


EPISODE_CSV_COLUMNS = None  # computed on first write


def write_episode_csv(path, log: RolloutLog, meta: dict | None = None,
                      body_mass: float | None = None) -> None:
    """Per-tick episode log; header comments carry the provenance needed to
    replay it deterministically.  With `body_mass`, applied torques are also
    written normalized to Nm/kg."""
    n_act = len(log.actions[0]) if log.actions else 0
    n_mus = len(log.activations[0]) if log.activations else 0
    nmkg = body_mass is not None
    cols = (["t", "reward"]
            + [f"r_{k}" for k in ("vel", "eff", "rom", "sm", "fall", "knee")]
            + ["com_speed", "target_speed"]
            + ["grf_left_n", "grf_left_t", "grf_right_n", "grf_right_t"]
            + ["exo_cmd_l", "exo_cmd_r", "exo_torque_l", "exo_torque_r"]
            + (["exo_torque_l_nmkg", "exo_torque_r_nmkg"] if nmkg else [])
            + [f"act{i}" for i in range(n_mus)]
            + [f"a{i}" for i in range(n_act)])
    with open(path, "w", newline="") as f:
        f.write(f"# slope_deg={log.slope_deg}\n")
        f.write(f"# target_speed={log.target_speed}\n")
        f.write(f"# fell={int(log.fell)}\n")
        for k, v in (meta or {}).items():
            f.write(f"# {k}={v}\n")
        w = csv.writer(f)
        w.writerow(cols)
        for i in range(len(log)):
            terms = log.reward_terms[i]
            torque = list(log.exo_torque[i])
            row = ([log.t[i], log.rewards[i]]
                   + [terms[k] for k in ("vel", "eff", "rom", "sm", "fall", "knee")]
                   + [log.com_speed[i], log.target_speeds[i]]
                   + list(log.grf[i]) + list(log.exo_cmd[i]) + torque
                   + ([torque[0] / body_mass, torque[1] / body_mass] if nmkg else [])
                   + list(log.activations[i])
                   + list(log.actions[i]))
            w.writerow([repr(float(x)) for x in row])


def read_episode_csv(path):
    """Returns (meta dict, column names, rows as float array)."""
    meta = {}
    rows = []
    cols = None
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("# "):
                k, v = line[2:].split("=", 1)
                meta[k] = v
            elif cols is None:
                cols = line.split(",")
            elif line:
                rows.append([float(x) for x in line.split(",")])
    return meta, cols, np.asarray(rows)
