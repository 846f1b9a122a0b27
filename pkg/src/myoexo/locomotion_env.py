"""Episodic locomotion environment: synergy-based action decoding,
privileged observation assembly, reward, termination, and the per-episode
slope/speed randomization.

Control runs at 40 Hz; each control tick holds the decoded action over five
200 Hz physics substeps (zero-order hold).  Exoskeleton commands are shaped
once per tick (clamp + rate limit) and filtered at the physics rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .body import BodyModel, SimState, Terrain, standard_biped
from .curriculum import (
    SLOPES_DEG,
    CurriculumContext,
    next_target_speed,
    sample_slope,
)
from .dynamics import (
    NonFiniteState,
    evaluate_kinematics,
    knee_reaction_forces,
    step_dynamics,
)
from .exo import ExoPipelineConfig, ExoPipelineState, filter_substep, shape_command
from .muscles import (
    MuscleSet,
    advance_activations,
    joint_torques_from_muscles,
    muscle_forces,
    standard_muscles,
    trunk_actuator_torques,
)
from .reward import RewardWeights, StepSnapshot, compute_reward
from .synergy import SynergyBasis, synergy_expand

SYNERGIES_PER_LEG = 4
ACTION_DIM = 2 * SYNERGIES_PER_LEG + 2 + 2   # per-leg synergies, trunk pair, exo pair


class SteppedAfterTermination(RuntimeError):
    pass


@dataclass
class EnvConfig:
    control_hz: float = 40.0
    physics_hz: float = 200.0
    horizon_s: float = 20.0
    fall_fraction: float = 0.6           # of standing COM height above surface
    init_joint_jitter: float = 0.05      # rad
    init_speed_scale: float = 0.5        # initial COM speed as fraction of target
    init_swing_hip: float = 0.15         # rad, asymmetric early-swing offset
    joint_vel_scale: float = 0.1         # observation scaling
    exo: ExoPipelineConfig = field(default_factory=ExoPipelineConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)

    @property
    def substeps(self) -> int:
        return int(round(self.physics_hz / self.control_hz))

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_hz

    @property
    def physics_dt(self) -> float:
        return 1.0 / self.physics_hz

    @property
    def horizon_ticks(self) -> int:
        return int(round(self.horizon_s * self.control_hz))


def decode_action(action: np.ndarray, basis: SynergyBasis, stage: str):
    """Split a raw policy vector into muscle excitations and exo commands.

    Synergy and trunk entries are clipped to [0, 1] (a zero vector decodes to
    zero excitation); exo entries are clamped to [-1, 1] and forced to zero
    unless the stage is exo-assisted ("2a").  Muscle excitations come back
    ordered [left leg x8, right leg x8] followed by the trunk pair.
    """
    a = np.asarray(action, dtype=float)
    if a.shape != (ACTION_DIM,):
        raise ValueError(f"expected action of length {ACTION_DIM}")
    k = SYNERGIES_PER_LEG
    syn_l = np.clip(a[:k], 0.0, 1.0)
    syn_r = np.clip(a[k:2 * k], 0.0, 1.0)
    trunk = np.clip(a[2 * k:2 * k + 2], 0.0, 1.0)
    exo = np.clip(a[2 * k + 2:], -1.0, 1.0) if stage == "2a" else np.zeros(2)
    excitations = np.concatenate([
        synergy_expand(syn_l, basis), synergy_expand(syn_r, basis)])
    return excitations, trunk, exo


class LocomotionEnv:
    """One independent plant instance; never shared between workers."""

    def __init__(self, cfg: EnvConfig | None = None,
                 model: BodyModel | None = None,
                 muscles: MuscleSet | None = None,
                 basis: SynergyBasis | None = None,
                 rng: np.random.Generator | None = None):
        self.cfg = cfg or EnvConfig()
        self.model = model or standard_biped()
        self.muscles = muscles or MuscleSet(standard_muscles())
        self.basis = basis if basis is not None else SynergyBasis(
            np.eye(8)[:, :SYNERGIES_PER_LEG], vaf=0.0)
        if self.basis.rank != SYNERGIES_PER_LEG:
            raise ValueError(f"basis rank must be {SYNERGIES_PER_LEG}")
        self.rng = rng or np.random.default_rng(0)

        # exo pipeline copies per side; filter runs at the physics rate
        base = self.cfg.exo
        self.exo_cfg = ExoPipelineConfig(
            tau_lpf=base.tau_lpf, dt=self.cfg.physics_dt, t_max=base.t_max,
            rate_limit_c=base.rate_limit_c, subject_mass=base.subject_mass,
            reference_mass=base.reference_mass)

        self._standing_com_height = self._compute_standing_height()
        self.obs_dim = 4 * self.muscles.n + 6 + 6 + 2 + 4 + 4 + 2 + 2 + 1
        self.action_dim = ACTION_DIM
        self.terminated = True
        self.state: SimState | None = None

    def _compute_standing_height(self) -> float:
        from .body import standing_pose
        from .dynamics import com_state

        pos, _ = com_state(standing_pose(self.model), self.model)
        return float(pos[1])

    # -- episode control ------------------------------------------------------

    def reset(self, ctx: CurriculumContext) -> np.ndarray:
        """Sample slope and target speed, re-seat the biped, zero pipelines."""
        slope_index = sample_slope(ctx.scores, self.rng)
        speed = next_target_speed(ctx)
        return self.reset_condition(SLOPES_DEG[slope_index], speed, ctx.stage)

    def reset_condition(self, slope_deg: float, target_speed: float,
                        stage: str = "2a") -> np.ndarray:
        """Reset to an explicit condition (evaluation grids, scripted runs)."""
        self.ctx_stage = stage
        self.slope_index = SLOPES_DEG.index(int(round(slope_deg)))
        self.terrain = Terrain(slope_deg)
        self.target_speed = target_speed

        s = self.terrain.slope_rad
        leg = self.model.segments[1].length + self.model.segments[2].length
        q = np.zeros(9)
        q[1] = leg + self.model.foot_sole_drop / math.cos(s) \
            + self.terrain.surface_height(0.0)
        q[5] = q[8] = s                      # soles parallel to the surface
        jitter = self.rng.uniform(-1.0, 1.0, 6) * self.cfg.init_joint_jitter
        q[3:] += jitter
        q[3] += self.cfg.init_swing_hip      # left leg slightly forward
        q[4] += 2 * self.cfg.init_swing_hip  # with a bent knee
        q[6] -= self.cfg.init_swing_hip / 2
        q[1] += 0.005

        qdot = np.zeros(9)
        v0 = self.cfg.init_speed_scale * self.target_speed
        qdot[0] = v0 * math.cos(s)
        qdot[1] = v0 * math.sin(s)

        self.state = SimState(q, qdot)
        self.activations = np.zeros(self.muscles.n)
        self.trunk_excitation = np.zeros(2)
        self.exo_state = ExoPipelineState(np.zeros(2), np.zeros(2))
        self.prev_exo_cmd = np.zeros(2)
        self.tick = 0
        self.terminated = False
        self.fell = False
        return self._observe(np.zeros(self.muscles.n), np.zeros(2))

    def substep(self, excitations: np.ndarray, exo_cmd_nm: np.ndarray,
                root_wrench=None):
        """Advance one physics step under held excitations and exo command.

        Returns (applied exo torque (2,), joint torques from muscles (6,)).
        Exposed for the 100 Hz distillation rollouts; `step` drives it five
        times per control tick.
        """
        self.activations = advance_activations(
            self.activations, excitations, self.cfg.physics_dt, self.muscles)
        forces = muscle_forces(self.activations, self.state.q[3:],
                               self.state.qdot[3:], self.muscles)
        tau = joint_torques_from_muscles(forces, self.muscles)
        tau = tau + trunk_actuator_torques(self.trunk_excitation, self.muscles)
        self._bio_tau = tau

        exo_torque = filter_substep(exo_cmd_nm, self.exo_state, self.exo_cfg)
        tau_total = tau.copy()
        tau_total[0] += exo_torque[0]   # hip_l
        tau_total[3] += exo_torque[1]   # hip_r
        self.state = step_dynamics(self.state, self.model, tau_total,
                                   self.terrain, self.cfg.physics_dt,
                                   root_wrench=root_wrench)
        return exo_torque, tau

    def step(self, action: np.ndarray):
        """One 40 Hz control tick: returns (obs, reward, terminated, info)."""
        if self.terminated:
            raise SteppedAfterTermination("episode is over; call reset")
        excitations, trunk, exo_raw = decode_action(action, self.basis,
                                                    self.ctx_stage)
        self.trunk_excitation = trunk

        prev_cmd = np.array(self.exo_state.u_prev_cmd, dtype=float, copy=True)
        exo_cmd_nm = shape_command(exo_raw, self.exo_state, self.exo_cfg)
        cmd = np.array(self.exo_state.u_prev_cmd, dtype=float, copy=True)
        cmd_delta = cmd - prev_cmd

        n_sub = self.cfg.substeps
        gyro_l = np.empty(n_sub)
        gyro_r = np.empty(n_sub)
        exo_trace = np.empty((n_sub, 2))
        t_trace = np.empty(n_sub)
        nonfinite = False
        try:
            for i in range(n_sub):
                exo_torque, _ = self.substep(excitations, exo_cmd_nm)
                qd = self.state.qdot
                gyro_l[i] = qd[2] + qd[3]
                gyro_r[i] = qd[2] + qd[6]
                exo_trace[i] = exo_torque
                t_trace[i] = self.state.t
        except NonFiniteState:
            nonfinite = True

        self.tick += 1
        if nonfinite:
            # hard fault counts as a fall; state is no longer usable
            self.fell = True
            self.terminated = True
            obs = np.zeros(self.obs_dim)
            snap = self._snapshot(cmd_delta, fell=True, degenerate=True)
            reward, terms = compute_reward(snap, self.cfg.weights,
                                           self.target_speed)
            info = self._info(terms, exo_trace, gyro_l, gyro_r, t_trace,
                              np.zeros(6), nonfinite=True)
            return obs, reward, True, info

        kin = evaluate_kinematics(self.state, self.model)
        com_h = self._com_surface_height(kin)
        self.fell = com_h < self.cfg.fall_fraction * self._standing_com_height
        horizon = self.tick >= self.cfg.horizon_ticks
        self.terminated = self.fell or horizon

        snap = self._snapshot(cmd_delta, fell=self.fell, kin=kin)
        reward, terms = compute_reward(snap, self.cfg.weights, self.target_speed)
        obs = self._observe(excitations, exo_trace[-1], kin=kin)
        info = self._info(terms, exo_trace, gyro_l, gyro_r, t_trace,
                          self._bio_tau)
        info["snapshot"] = snap
        return obs, reward, self.terminated, info

    # -- internals --------------------------------------------------------

    def _com_surface_height(self, kin) -> float:
        m = self.model.segment_masses
        com = (m[:, None] * kin.com_pos).sum(axis=0) / m.sum()
        origin = np.array([0.0, self.terrain.origin_height])
        return float((com - origin) @ self.terrain.normal)

    def _com_velocity(self, kin) -> np.ndarray:
        m = self.model.segment_masses
        return (m[:, None] * kin.com_vel).sum(axis=0) / m.sum()

    def _snapshot(self, cmd_delta, fell: bool, kin=None, degenerate=False):
        if degenerate:
            return StepSnapshot(0.0, 0.0, 0.0, 0.0, np.zeros(2), np.zeros(2),
                                np.concatenate([self.activations,
                                                self.trunk_excitation]),
                                cmd_delta, fell=True)
        v = self._com_velocity(kin)
        qdd = getattr(self.state, "qdd", np.zeros(9))
        knee_l, knee_r = knee_reaction_forces(self.state, self.model,
                                              self.terrain, qdd)
        bw = self.model.total_mass * self.model.gravity
        return StepSnapshot(
            forward_speed=float(v @ self.terrain.tangent),
            normal_speed=float(v @ self.terrain.normal),
            trunk_pitch=float(self.state.q[2]),
            trunk_pitch_rate=float(self.state.qdot[2]),
            knee_angles=self.state.q[[4, 7]].copy(),
            knee_loads_bw=np.array([knee_l, knee_r]) / bw,
            activations=np.concatenate([self.activations,
                                        self.trunk_excitation]),
            exo_cmd_delta=cmd_delta,
            fell=fell,
        )

    def _observe(self, excitations, exo_torque, kin=None) -> np.ndarray:
        if kin is None:
            kin = evaluate_kinematics(self.state, self.model)
        mset = self.muscles
        q, qd = self.state.q, self.state.qdot
        l_norm = np.clip((mset.path_lengths(q[3:]) - mset.slack) / mset.l_opt,
                         0.2, 1.8)
        v_norm = mset.fiber_velocities(qd[3:]) / (mset.v_max * mset.l_opt)
        forces = muscle_forces(self.activations, q[3:], qd[3:], mset)

        from .dynamics import _contact_update
        _, fn, ft, *_ = _contact_update(self.state, self.model, self.terrain, kin)
        bw = self.model.total_mass * self.model.gravity
        grf = np.array([fn[0] + fn[1], ft[0] + ft[1],
                        fn[2] + fn[3], ft[2] + ft[3]]) / bw

        ankle_l = kin.contact_pos[0:2].mean(axis=0)  # heel/toe midpoint
        ankle_r = kin.contact_pos[2:4].mean(axis=0)
        pelvis = q[:2]
        v = self._com_velocity(kin)

        obs = np.concatenate([
            l_norm, v_norm, forces / mset.f_max, excitations,
            q[3:], qd[3:] * self.cfg.joint_vel_scale,
            [q[2], qd[2] * self.cfg.joint_vel_scale],
            ankle_l - pelvis, ankle_r - pelvis,
            grf,
            np.asarray(exo_torque) / self.exo_cfg.t_max,
            [v @ self.terrain.tangent, v @ self.terrain.normal],
            [self.target_speed],
        ])
        return obs.astype(np.float64)

    def _info(self, terms, exo_trace, gyro_l, gyro_r, t_trace, bio_tau,
              nonfinite=False):
        return {
            "reward_terms": terms,
            "fell": self.fell,
            "nonfinite": nonfinite,
            "slope_deg": self.terrain.slope_deg,
            "slope_index": self.slope_index,
            "target_speed": self.target_speed,
            "t": self.state.t if self.state is not None else float("nan"),
            "exo_torque": exo_trace[-1].copy(),
            "exo_torque_substeps": exo_trace,
            "exo_cmd": np.array(self.exo_state.u_prev_cmd, copy=True),
            "gyro_l_substeps": gyro_l,
            "gyro_r_substeps": gyro_r,
            "t_substeps": t_trace,
            "activations": np.concatenate([self.activations,
                                           self.trunk_excitation]),
            "bio_joint_torques": np.asarray(bio_tau, dtype=float),
            "joint_velocities": self.state.qdot[3:].copy()
            if self.state is not None else np.zeros(6),
        }
