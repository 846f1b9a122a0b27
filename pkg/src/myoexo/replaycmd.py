"""Deterministic episode replay: re-run logged actions against a freshly
seeded environment and demand bit-identical rewards, forces, and torques."""

from __future__ import annotations

import os

import numpy as np

from .config import load_config, make_env_factory
from .rng import substream
from .rollout import read_episode_csv
from .synergy import load_basis_csv


def replay_episode(run_dir: str, episode_csv: str):
    """Returns (ok, human-readable detail)."""
    meta, cols, rows = read_episode_csv(episode_csv)
    if meta.get("kind") == "student":
        return False, "student episodes are not replayable from actions alone"
    cfg = load_config(os.path.join(run_dir, "config.yaml"))
    basis_path = os.path.join(run_dir, "basis.csv")
    basis = load_basis_csv(basis_path) if os.path.exists(basis_path) else None
    factory = make_env_factory(cfg, basis=basis)
    env = factory(substream(int(meta["seed"]), meta["stream"]))
    env.reset_condition(float(meta["slope_deg"]), float(meta["target_speed"]),
                        meta.get("stage", "2a"))

    a_cols = [i for i, c in enumerate(cols) if c.startswith("a")
              and c[1:].isdigit()]
    check_cols = {c: cols.index(c) for c in
                  ("reward", "grf_right_n", "exo_torque_r", "com_speed")}
    for k, row in enumerate(rows):
        action = np.array([row[i] for i in a_cols])
        _, reward, done, info = env.step(action)
        from .dynamics import contact_forces
        _, right = contact_forces(env.state, env.model, env.terrain)
        snap = info.get("snapshot")
        got = {"reward": reward, "grf_right_n": right[0],
               "exo_torque_r": float(info["exo_torque"][1]),
               "com_speed": snap.forward_speed if snap else 0.0}
        for name, col in check_cols.items():
            if got[name] != row[col]:
                return False, (f"tick {k}: {name} diverged "
                               f"({got[name]!r} vs logged {row[col]!r})")
        if done and k < len(rows) - 1:
            return False, f"episode terminated early at tick {k}"
    return True, f"replayed {len(rows)} ticks bit-identically"
