"""Teacher-to-student distillation.

Teacher rollouts are resampled to 100 Hz; each supervised sample pairs a
0.95 s (95-sample) history of one thigh's angular velocity with the
normalized hip command at the window's final instant.  The student is the
causal TCN, trained with mean squared error; closed-loop evaluation feeds
the student's output through the same shaping pipeline while the teacher
keeps driving the muscles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exo import shape_command
from .locomotion_env import LocomotionEnv, decode_action
from .netcore import TcnNet, OptimState, adam_step
from .rollout import RolloutLog, policy_rollout

WINDOW = 95
STUDENT_HZ = 100.0


class TeacherUnstable(RuntimeError):
    pass


class EmptyDataset(ValueError):
    pass


class ZeroVarianceTeacher(ValueError):
    pass


@dataclass
class DistillDataset:
    windows: np.ndarray        # (N, WINDOW) float32, raw gyro rad/s
    labels: np.ndarray         # (N,) float32, normalized command in [-1, 1]
    cond_slope: np.ndarray     # (N,)
    cond_speed: np.ndarray     # (N,) nominal trial speed
    train_idx: np.ndarray
    val_idx: np.ndarray
    norm_mean: float           # input standardization, train split only
    norm_std: float

    def __len__(self):
        return len(self.labels)


def _resample_streams(log: RolloutLog):
    """Physics-rate traces decimated to the student rate (200 -> 100 Hz)."""
    step = int(round(log.physics_hz / STUDENT_HZ))
    gyro_r = log.asarray("gyro_r")[::step]
    gyro_l = log.asarray("gyro_l")[::step]
    cmd = np.asarray(log.exo_cmd_sub)[::step]
    return gyro_l, gyro_r, cmd


def samples_from_log(log: RolloutLog, window: int = WINDOW):
    """Right-side (window, label) pairs; one per tick after the first fill."""
    _, gyro_r, cmd = _resample_streams(log)
    n = len(gyro_r)
    out_w, out_y = [], []
    for k in range(window, n):
        out_w.append(gyro_r[k - window + 1:k + 1])
        out_y.append(cmd[k, 1])
    if not out_w:
        return (np.zeros((0, window), dtype=np.float32),
                np.zeros(0, dtype=np.float32))
    return (np.asarray(out_w, dtype=np.float32),
            np.asarray(out_y, dtype=np.float32))


def build_dataset(rollouts: list[RolloutLog], rng: np.random.Generator,
                  window: int = WINDOW, val_fraction: float = 0.2,
                  max_fall_rate: float = 0.2) -> DistillDataset:
    """Assemble, condition-stratify, and normalize the supervised dataset."""
    if not rollouts:
        raise EmptyDataset("no rollouts")
    falls = sum(1 for r in rollouts if r.fell)
    if falls / len(rollouts) > max_fall_rate:
        raise TeacherUnstable(
            f"{falls}/{len(rollouts)} rollouts fell (> {max_fall_rate:.0%})")

    ws, ys, slopes, speeds = [], [], [], []
    for log in rollouts:
        w, y = samples_from_log(log, window)
        ws.append(w)
        ys.append(y)
        slopes.append(np.full(len(y), log.slope_deg, dtype=np.float32))
        speeds.append(np.full(len(y), log.target_speed, dtype=np.float32))
    windows = np.concatenate(ws)
    labels = np.concatenate(ys)
    cond_slope = np.concatenate(slopes)
    cond_speed = np.concatenate(speeds)
    if len(labels) == 0:
        raise EmptyDataset("rollouts shorter than the history window")

    train_parts, val_parts = [], []
    conds = sorted(set(zip(cond_slope.tolist(), cond_speed.tolist())))
    for cond in conds:
        idx = np.where((cond_slope == cond[0]) & (cond_speed == cond[1]))[0]
        idx = idx[rng.permutation(len(idx))]
        n_val = int(round(val_fraction * len(idx)))
        val_parts.append(idx[:n_val])
        train_parts.append(idx[n_val:])
    train_idx = np.sort(np.concatenate(train_parts))
    val_idx = np.sort(np.concatenate(val_parts))

    mean = float(windows[train_idx].mean()) if len(train_idx) else 0.0
    std = float(windows[train_idx].std()) if len(train_idx) else 1.0
    return DistillDataset(windows, labels, cond_slope, cond_speed,
                          train_idx, val_idx, mean, max(std, 1e-8))


def teacher_rollouts(action_fn, env_factory, slopes, speeds,
                     duration_s: float, include_varying: bool = True):
    """Constant-speed trials on every condition plus one smoothly varying
    speed ramp per slope."""
    logs = []
    for slope in slopes:
        for speed in speeds:
            env = env_factory()
            ticks = int(round(duration_s * env.cfg.control_hz))
            logs.append(policy_rollout(env, action_fn, ticks, slope, speed))
        if include_varying:
            env = env_factory()
            ticks = int(round(duration_s * env.cfg.control_hz))
            lo, hi = min(speeds), max(speeds)

            def ramp(t, lo=lo, hi=hi, T=duration_s):
                phase = (t % T) / T
                return lo + (hi - lo) * (1 - abs(2 * phase - 1))

            logs.append(policy_rollout(env, action_fn, ticks, slope,
                                       lo, target_speed_fn=ramp))
    return logs


# -- student training -----------------------------------------------------

def train_student(dataset: DistillDataset, net: TcnNet,
                  rng: np.random.Generator, epochs: int = 5,
                  lr: float = 1e-3, batch_size: int = 128):
    """Minibatch MSE training; returns (train losses, val losses) per epoch."""
    if len(dataset) == 0 or len(dataset.train_idx) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    opt = OptimState.for_params(net.params, lr=lr)
    train_losses, val_losses = [], []
    for _ in range(epochs):
        order = dataset.train_idx[rng.permutation(len(dataset.train_idx))]
        total, count = 0.0, 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            x = (dataset.windows[idx] - dataset.norm_mean) / dataset.norm_std
            y, cache = net.forward_sequence(x[:, None, :])
            pred = y[:, -1]
            err = pred - dataset.labels[idx]
            loss = float(np.mean(err * err))
            gout = np.zeros_like(y)
            gout[:, -1] = (2.0 / len(idx)) * err
            grads, _ = net.backward_sequence(cache, gout)
            adam_step(net.params, grads, opt)
            net.bump_version()
            total += loss * len(idx)
            count += len(idx)
        train_losses.append(total / count)
        val_losses.append(validation_loss(dataset, net, batch_size))
    return train_losses, val_losses


def predict(net: TcnNet, dataset: DistillDataset, idx,
            batch_size: int = 256) -> np.ndarray:
    out = np.empty(len(idx), dtype=np.float64)
    for start in range(0, len(idx), batch_size):
        sl = idx[start:start + batch_size]
        x = (dataset.windows[sl] - dataset.norm_mean) / dataset.norm_std
        y, _ = net.forward_sequence(x[:, None, :])
        out[start:start + len(sl)] = y[:, -1]
    return out


def validation_loss(dataset: DistillDataset, net: TcnNet,
                    batch_size: int = 256) -> float:
    if len(dataset.val_idx) == 0:
        return float("nan")
    pred = predict(net, dataset, dataset.val_idx, batch_size)
    err = pred - dataset.labels[dataset.val_idx]
    return float(np.mean(err * err))


def evaluate_agreement(teacher: np.ndarray, student: np.ndarray) -> float:
    """Coefficient of determination of the student against the teacher."""
    t = np.asarray(teacher, dtype=float)
    s = np.asarray(student, dtype=float)
    if t.shape != s.shape:
        raise ValueError("traces must be aligned")
    denom = float(np.sum((t - t.mean()) ** 2))
    if denom == 0.0:
        raise ZeroVarianceTeacher("teacher trace has zero variance")
    return 1.0 - float(np.sum((t - s) ** 2)) / denom


# -- dataset container ------------------------------------------------------

_DS_MAGIC = b"MYODS1\n"


def save_dataset(path, dataset: DistillDataset) -> None:
    header = {
        "count": int(len(dataset)),
        "window": int(dataset.windows.shape[1]),
        "norm_mean": dataset.norm_mean,
        "norm_std": dataset.norm_std,
        "n_train": int(len(dataset.train_idx)),
        "n_val": int(len(dataset.val_idx)),
        "conditions": sorted(set(map(tuple, np.stack(
            [dataset.cond_slope, dataset.cond_speed], axis=1).tolist()))),
    }
    with open(path, "wb") as f:
        f.write(_DS_MAGIC)
        f.write(json.dumps(header, sort_keys=True).encode())
        f.write(b"\n\x00")
        for arr in (dataset.windows, dataset.labels, dataset.cond_slope,
                    dataset.cond_speed):
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        for arr in (dataset.train_idx, dataset.val_idx):
            f.write(np.ascontiguousarray(arr, dtype="<i8").tobytes())


def load_dataset(path) -> DistillDataset:
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(_DS_MAGIC):
        raise ValueError(f"{path}: bad dataset magic")
    rest = blob[len(_DS_MAGIC):]
    sep = rest.index(b"\n\x00")
    h = json.loads(rest[:sep].decode())
    payload = rest[sep + 2:]
    n, w = h["count"], h["window"]
    off = 0

    def take(count, dtype):
        nonlocal off
        arr = np.frombuffer(payload, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr.copy()

    windows = take(n * w, "<f4").reshape(n, w)
    labels = take(n, "<f4")
    cond_slope = take(n, "<f4")
    cond_speed = take(n, "<f4")
    train_idx = take(h["n_train"], "<i8")
    val_idx = take(h["n_val"], "<i8")
    return DistillDataset(windows, labels, cond_slope, cond_speed,
                          train_idx, val_idx, h["norm_mean"], h["norm_std"])


# -- closed loop ------------------------------------------------------------

def closed_loop_student_rollout(student: TcnNet, env: LocomotionEnv,
                                teacher_action_fn, slope_deg: float,
                                target_speed: float, duration_s: float,
                                norm_mean: float, norm_std: float) -> RolloutLog:
    """Muscles follow the frozen teacher; hip torques come from the student.

    The student reads each thigh's own gyro history at 100 Hz (the left
    command is the right-hip model applied to the left leg, i.e. mirrored by
    stride symmetry) and emits zero torque until its window has filled.
    """
    obs = env.reset_condition(slope_deg, target_speed, "2b")
    n_ticks = int(round(duration_s * env.cfg.control_hz))
    n_sub = env.cfg.substeps
    decim = int(round(env.cfg.physics_hz / STUDENT_HZ))
    log = RolloutLog(slope_deg, target_speed, env.cfg.control_hz,
                     env.cfg.physics_hz)
    buf_l, buf_r = [], []
    raw = np.zeros(2)
    cmd_nm = np.zeros(2)
    exo_torque = np.zeros(2)
    exc = np.zeros(env.muscles.n)
    substep_count = 0

    for tick in range(n_ticks):
        a = teacher_action_fn(obs)
        exc, trunk, _ = decode_action(a, env.basis, "2b")
        env.trunk_excitation = trunk
        for k in range(n_sub):
            if substep_count % decim == 0:
                qd = env.state.qdot
                buf_l.append(qd[2] + qd[3])
                buf_r.append(qd[2] + qd[6])
                # first output strictly after the 0.95 s fill, matching the
                # dataset's window/label alignment
                if len(buf_r) > WINDOW:
                    wl = (np.asarray(buf_l[-WINDOW:]) - norm_mean) / norm_std
                    wr = (np.asarray(buf_r[-WINDOW:]) - norm_mean) / norm_std
                    raw = np.array([student.forward_window(wl),
                                    student.forward_window(wr)])
                else:
                    raw = np.zeros(2)
                cmd_nm = shape_command(raw, env.exo_state, env.exo_cfg)
            exo_torque, bio_tau = env.substep(exc, cmd_nm)
            substep_count += 1
            log.t_sub.append(env.state.t)
            log.gyro_l.append(env.state.qdot[2] + env.state.qdot[3])
            log.gyro_r.append(env.state.qdot[2] + env.state.qdot[6])
            log.exo_torque_sub.append(np.asarray(exo_torque, dtype=float))
            log.exo_cmd_sub.append(np.array(env.exo_state.u_prev_cmd,
                                            dtype=float, copy=True))

        from .dynamics import contact_forces, com_state
        left, right = contact_forces(env.state, env.model, env.terrain)
        _, v = com_state(env.state, env.model)
        log.t.append(env.state.t)
        log.actions.append(np.asarray(a, dtype=float))
        log.rewards.append(0.0)
        log.reward_terms.append({k: 0.0 for k in
                                 ("vel", "eff", "rom", "sm", "fall", "knee")})
        log.activations.append(np.concatenate([env.activations, trunk]))
        log.grf.append(np.array([left[0], left[1], right[0], right[1]]))
        log.exo_cmd.append(np.array(env.exo_state.u_prev_cmd, dtype=float,
                                    copy=True))
        log.exo_torque.append(np.asarray(exo_torque, dtype=float))
        log.bio_joint_torques.append(np.asarray(bio_tau, dtype=float))
        log.joint_velocities.append(env.state.qdot[3:].copy())
        log.com_speed.append(float(v @ env.terrain.tangent))
        log.target_speeds.append(target_speed)
        obs = env._observe(exc, exo_torque)
    return log
