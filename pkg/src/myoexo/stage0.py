"""Scripted gait rollouts on the real plant.

An open-loop, stride-phase-driven excitation pattern plays through the full
muscle dynamics while a root harness (vertical support spring, trunk-pitch
damper, forward tow) keeps the model upright, the way a partial-bodyweight
treadmill harness would.  The recorded muscle activations provide the
stride-segmented matrix the synergy basis is factorized from, and the same
machinery doubles as a scripted oscillatory torque source for exercising the
distillation pipeline without a trained policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exo import shape_command
from .locomotion_env import EnvConfig, LocomotionEnv
from .muscles import MUSCLES_PER_LEG
from .rollout import RolloutLog
from .synergy import ActivationMatrix


@dataclass
class HarnessConfig:
    vertical_stiffness: float = 3000.0    # N/m toward standing pelvis height
    vertical_damping: float = 400.0       # N s/m
    pitch_stiffness: float = 600.0        # Nm/rad upright
    pitch_damping: float = 60.0           # Nm s/rad
    tow_gain: float = 250.0               # N s/m toward the target speed


@dataclass
class Stage0Config:
    duration_s: float = 12.0
    speeds: tuple = (0.8, 1.0, 1.2)
    slope_deg: float = 0.0
    amplitude: float = 0.45
    jitter: float = 0.03                  # multiplicative excitation noise
    harness: HarnessConfig = field(default_factory=HarnessConfig)


def stride_period(speed: float) -> float:
    """Nominal stride time shrinking with walking speed."""
    return 0.7 + 0.5 / max(speed, 0.1)


def _bump(phase, center, width):
    """Raised-cosine activation window on the unit circle."""
    d = (phase - center + 0.5) % 1.0 - 0.5
    x = np.clip(d / width, -1.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * x)) * (np.abs(d) <= width)

# per-muscle (center, width, gain) windows over the stride, heel strike at 0
_PATTERN = {
    "hfl": (0.65, 0.12, 1.0),
    "glu": (0.08, 0.14, 0.8),
    "ham": (0.93, 0.10, 0.7),
    "rf": (0.62, 0.10, 0.5),
    "vas": (0.08, 0.13, 1.0),
    "gas": (0.42, 0.12, 0.9),
    "sol": (0.35, 0.18, 1.0),
    "ta": (0.72, 0.22, 0.6),
}
_ORDER = ("hfl", "glu", "ham", "rf", "vas", "gas", "sol", "ta")


def leg_excitation(phase: float, amplitude: float) -> np.ndarray:
    """Excitations for one leg's eight muscles at a stride phase in [0, 1)."""
    out = np.empty(MUSCLES_PER_LEG)
    for i, name in enumerate(_ORDER):
        c, w, g = _PATTERN[name]
        out[i] = amplitude * g * _bump(phase, c, w)
    return np.clip(out, 0.0, 1.0)


def scripted_exo_command(phase: float, speed: float) -> float:
    """Smooth bi-phasic hip torque profile: extension peak in early stance,
    flexion peak around pre-swing, speed-scaled amplitude."""
    gain = 0.5 + 0.45 * (speed - 0.7) / 0.8
    return float(gain * (-0.8 * _bump(phase, 0.16, 0.14)
                         + _bump(phase, 0.70, 0.14)))


def scripted_rollout(env: LocomotionEnv, speed: float, slope_deg: float,
                     duration_s: float, rng: np.random.Generator,
                     amplitude: float = 0.45, jitter: float = 0.03,
                     harness: HarnessConfig | None = None,
                     exo_source: str | None = None,
                     student=None, student_norm=(0.0, 1.0)) -> RolloutLog:
    """Run the harnessed plant under the scripted pattern.

    `exo_source="scripted"` drives the hip actuators with the oscillatory
    profile through the normal shaping pipeline; `exo_source="student"`
    lets a trained history network command each hip from its own thigh
    gyro at 100 Hz (zero until the window fills); otherwise the exo stays
    silent.  Stride boundaries are recorded from the generator phase.
    """
    h = harness or HarnessConfig()
    env.reset_condition(slope_deg, speed, "2a" if exo_source else "2b")
    period = stride_period(speed)
    n_ticks = int(round(duration_s * env.cfg.control_hz))
    n_sub = env.cfg.substeps
    dt = env.cfg.physics_dt
    y_ref = float(env.state.q[1])
    s = env.terrain.slope_rad

    log = RolloutLog(slope_deg, speed, env.cfg.control_hz, env.cfg.physics_hz)
    decim = max(1, int(round(env.cfg.physics_hz / 100.0)))
    window = student.window if student is not None else 0
    buf_l, buf_r = [], []
    substep_count = 0
    cmd_nm = np.zeros(2)
    for tick in range(n_ticks):
        t = tick / env.cfg.control_hz
        phase_r = (t / period) % 1.0
        phase_l = (phase_r + 0.5) % 1.0
        if phase_r < (1.0 / env.cfg.control_hz) / period:
            log.stride_ticks.append(tick)
        noise = 1.0 + jitter * rng.standard_normal(2 * MUSCLES_PER_LEG)
        exc = np.clip(np.concatenate([
            leg_excitation(phase_l, amplitude),
            leg_excitation(phase_r, amplitude)]) * noise, 0.0, 1.0)

        if exo_source == "scripted":
            raw = np.array([scripted_exo_command(phase_l, speed),
                            scripted_exo_command(phase_r, speed)])
        else:
            raw = np.zeros(2)
        if exo_source != "student":
            cmd_nm = shape_command(raw, env.exo_state, env.exo_cfg)
        cmd = np.array(env.exo_state.u_prev_cmd, dtype=float, copy=True)

        for k in range(n_sub):
            if exo_source == "student" and substep_count % decim == 0:
                qd = env.state.qdot
                buf_l.append(qd[2] + qd[3])
                buf_r.append(qd[2] + qd[6])
                if len(buf_r) > window:
                    mean, std = student_norm
                    wl = (np.asarray(buf_l[-window:]) - mean) / std
                    wr = (np.asarray(buf_r[-window:]) - mean) / std
                    raw = np.array([student.forward_window(wl),
                                    student.forward_window(wr)])
                else:
                    raw = np.zeros(2)
                cmd_nm = shape_command(raw, env.exo_state, env.exo_cfg)
                cmd = np.array(env.exo_state.u_prev_cmd, dtype=float, copy=True)
            qd = env.state.qdot
            v_along = qd[0] * math.cos(s) + qd[1] * math.sin(s)
            wrench = np.array([
                h.tow_gain * (speed - v_along),
                h.vertical_stiffness * (y_ref - env.state.q[1])
                - h.vertical_damping * qd[1],
                -h.pitch_stiffness * env.state.q[2] - h.pitch_damping * qd[2],
            ])
            exo_torque, bio_tau = env.substep(exc, cmd_nm, root_wrench=wrench)
            substep_count += 1
            log.t_sub.append(env.state.t)
            log.gyro_l.append(env.state.qdot[2] + env.state.qdot[3])
            log.gyro_r.append(env.state.qdot[2] + env.state.qdot[6])
            log.exo_torque_sub.append(np.asarray(exo_torque, dtype=float))
            log.exo_cmd_sub.append(cmd.copy())

        from .dynamics import contact_forces
        left, right = contact_forces(env.state, env.model, env.terrain)
        log.t.append(env.state.t)
        log.actions.append(raw.copy())
        log.rewards.append(0.0)
        log.reward_terms.append({k: 0.0 for k in
                                 ("vel", "eff", "rom", "sm", "fall", "knee")})
        log.activations.append(np.concatenate([env.activations, np.zeros(2)]))
        log.grf.append(np.array([left[0], left[1], right[0], right[1]]))
        log.exo_cmd.append(cmd.copy())
        log.exo_torque.append(np.asarray(exo_torque, dtype=float))
        log.bio_joint_torques.append(np.asarray(bio_tau, dtype=float))
        log.joint_velocities.append(env.state.qdot[3:].copy())
        log.com_speed.append(v_along)
        log.target_speeds.append(speed)
        prev_cmd = cmd
    return log


def right_leg_activation_matrix(logs: list[RolloutLog],
                                sample_rate_hz: float) -> ActivationMatrix:
    """Stack right-leg activations from several rollouts into one matrix.

    Stride bounds are concatenated with per-log offsets so downstream
    factorization sees every complete stride.
    """
    blocks = []
    bounds = []
    offset = 0
    for log in logs:
        act = log.asarray("activations")[:, MUSCLES_PER_LEG:2 * MUSCLES_PER_LEG]
        blocks.append(act.T)
        bounds.extend(int(b) + offset for b in log.stride_ticks)
        offset += act.shape[0]
    V = np.concatenate(blocks, axis=1)
    return ActivationMatrix(np.clip(V, 0.0, 1.0), sorted(bounds), sample_rate_hz)
