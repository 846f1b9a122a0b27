"""Hill-type musculotendon actuators with first-order activation dynamics.

Sixteen muscles (eight per leg) drive the hips, knees, and ankles through
constant moment arms; tendons are rigid, so fiber length is path length
minus slack and the whole update is algebraic apart from the activation
lag.  Two additional ideal torque actuators stabilize the trunk through
the hips (they have no Hill dynamics).

Sign conventions follow the joint coordinates: hip flexion, knee flexion,
and ankle dorsiflexion are positive, so extensor/plantarflexor moment arms
are negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .body import JOINT_NAMES, SimState


class InvalidRange(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass
class MuscleCurves:
    """Shape constants of the force-length/velocity/passive curves."""

    fl_width: float = 0.45        # gaussian width of the active bump
    fv_shape: float = 0.25        # concentric curvature
    fv_ecc_plateau: float = 1.4   # eccentric asymptote
    fv_ecc_scale: float = 0.08    # eccentric knee sharpness
    fp_exponent: float = 5.0      # passive exponential steepness
    fp_ref_strain: float = 0.5    # stretch at which passive force reaches F_max


@dataclass
class MuscleSpec:
    name: str
    f_max: float                          # N
    l_opt: float                          # m
    v_max: float                          # optimal lengths per second
    tau_act: float = 0.01                 # s
    tau_deact: float = 0.04               # s
    moment_arms: dict[str, float] = field(default_factory=dict)  # joint -> m
    slack_length: float = 0.25            # m
    curves: MuscleCurves = field(default_factory=MuscleCurves)

    def __post_init__(self):
        if self.f_max <= 0 or self.l_opt <= 0 or self.v_max <= 0:
            raise ValueError(f"{self.name}: f_max, l_opt, v_max must be positive")
        if not 0 < self.tau_act <= self.tau_deact:
            raise ValueError(f"{self.name}: need 0 < tau_act <= tau_deact")


@dataclass
class MuscleState:
    activation: float = 0.0
    excitation: float = 0.0
    fiber_length: float = 0.0      # m
    fiber_velocity: float = 0.0    # m/s
    force: float = 0.0             # N


def activation_step(a: float, e: float, dt: float, spec: MuscleSpec) -> float:
    """Advance the first-order activation lag by dt (exact exponential form).

    The time constant is tau_act while excitation exceeds activation and
    tau_deact otherwise.
    """
    if not (0.0 <= a <= 1.0 and 0.0 <= e <= 1.0):
        raise InvalidRange(f"activation/excitation outside [0,1]: a={a}, e={e}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    tau = spec.tau_act if e > a else spec.tau_deact
    return float(np.clip(e + (a - e) * math.exp(-dt / tau), 0.0, 1.0))


def force_length(l_norm, curves: MuscleCurves):
    """Active force-length: gaussian bump, exactly 1 at optimal length."""
    x = (np.asarray(l_norm) - 1.0) / curves.fl_width
    return np.exp(-x * x)


def force_velocity(v_norm, curves: MuscleCurves):
    """Hill hyperbola: 1 at rest, 0 at max shortening, <= plateau lengthening."""
    v = np.clip(np.asarray(v_norm, dtype=float), -1.0, None)
    concentric = (1.0 + v) / (1.0 - v / curves.fv_shape)
    eccentric = 1.0 + (curves.fv_ecc_plateau - 1.0) * v / (v + curves.fv_ecc_scale)
    return np.where(v < 0.0, concentric, eccentric)


def passive_force(l_norm, curves: MuscleCurves):
    """Passive exponential rise beyond optimal length; exactly 0 below it."""
    stretch = np.maximum(0.0, np.asarray(l_norm) - 1.0)
    denom = math.expm1(curves.fp_exponent * curves.fp_ref_strain)
    return np.expm1(curves.fp_exponent * stretch) / denom


def muscle_force(a: float, l_norm: float, v_norm: float, spec: MuscleSpec) -> float:
    """Total musculotendon force (N): active f_l * f_v scaling plus passive."""
    a = min(max(a, 0.0), 1.0)
    l_norm = min(max(l_norm, 0.2), 1.8)
    c = spec.curves
    active = a * force_length(l_norm, c) * force_velocity(v_norm, c)
    return float(spec.f_max * (active + passive_force(l_norm, c)))


# -- the standard planar muscle set ------------------------------------------
#
# F_max / l_opt follow the classic planar gait models; moment arms are
# constant per (muscle, joint).  These are artifact defaults, exposed in the
# run config, not values taken from any measured subject.

_LEG_MUSCLES = (
    # name,  f_max, l_opt, arms {joint: m}
    ("hfl", 2000.0, 0.11, {"hip": +0.08}),
    ("glu", 1500.0, 0.11, {"hip": -0.08}),
    ("ham", 3000.0, 0.10, {"hip": -0.08, "knee": +0.05}),
    ("rf", 1200.0, 0.08, {"hip": +0.08, "knee": -0.05}),
    ("vas", 6000.0, 0.08, {"knee": -0.06}),
    ("gas", 1500.0, 0.05, {"knee": +0.05, "ankle": -0.05}),
    ("sol", 4000.0, 0.04, {"ankle": -0.05}),
    ("ta", 800.0, 0.06, {"ankle": +0.04}),
)

MUSCLES_PER_LEG = len(_LEG_MUSCLES)
N_MUSCLES = 2 * MUSCLES_PER_LEG
TRUNK_ACTUATOR_TORQUE = 100.0  # Nm at full excitation, per direction pair


def standard_muscles(v_max: float = 12.0,
                     curves: MuscleCurves | None = None) -> list[MuscleSpec]:
    """16 muscles: left leg block then right leg block."""
    curves = curves or MuscleCurves()
    specs = []
    for side in ("l", "r"):
        for name, f_max, l_opt, arms in _LEG_MUSCLES:
            specs.append(MuscleSpec(
                name=f"{name}_{side}",
                f_max=f_max, l_opt=l_opt, v_max=v_max,
                moment_arms={f"{j}_{side}": r for j, r in arms.items()},
                curves=curves,
            ))
    return specs


@dataclass
class MuscleSet:
    """Muscle specs bound to the 6-joint layout, with precomputed arm matrix."""

    specs: list[MuscleSpec]
    trunk_torque: float = TRUNK_ACTUATOR_TORQUE

    def __post_init__(self):
        n = len(self.specs)
        self.arm_matrix = np.zeros((n, 6))         # m, signed
        for i, spec in enumerate(self.specs):
            for joint, arm in spec.moment_arms.items():
                self.arm_matrix[i, JOINT_NAMES.index(joint)] = arm
        self.f_max = np.array([s.f_max for s in self.specs])
        self.l_opt = np.array([s.l_opt for s in self.specs])
        self.v_max = np.array([s.v_max for s in self.specs])
        self.tau_act = np.array([s.tau_act for s in self.specs])
        self.tau_deact = np.array([s.tau_deact for s in self.specs])
        self.slack = np.array([s.slack_length for s in self.specs])
        # reference pose (all joint angles zero) puts every fiber at l_opt
        self.path_ref = self.slack + self.l_opt
        self.curves = self.specs[0].curves if self.specs else MuscleCurves()

    @property
    def n(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    def path_lengths(self, q_joints: np.ndarray) -> np.ndarray:
        return self.path_ref - self.arm_matrix @ q_joints

    def fiber_velocities(self, qd_joints: np.ndarray) -> np.ndarray:
        return -self.arm_matrix @ qd_joints


def advance_activations(activations: np.ndarray, excitations: np.ndarray,
                        dt: float, mset: MuscleSet) -> np.ndarray:
    """Vectorized exact-exponential activation update for the whole set."""
    e = np.clip(excitations, 0.0, 1.0)
    tau = np.where(e > activations, mset.tau_act, mset.tau_deact)
    return np.clip(e + (activations - e) * np.exp(-dt / tau), 0.0, 1.0)


def muscle_forces(activations: np.ndarray, q_joints: np.ndarray,
                  qd_joints: np.ndarray, mset: MuscleSet) -> np.ndarray:
    """Forces (N) for the whole set at the given joint configuration."""
    l_norm = np.clip((mset.path_lengths(q_joints) - mset.slack) / mset.l_opt, 0.2, 1.8)
    v_norm = mset.fiber_velocities(qd_joints) / (mset.v_max * mset.l_opt)
    c = mset.curves
    active = activations * force_length(l_norm, c) * force_velocity(v_norm, c)
    return mset.f_max * (active + passive_force(l_norm, c))


def joint_torques_from_muscles(forces: np.ndarray, mset: MuscleSet) -> np.ndarray:
    """Map muscle forces into the 6 joint torques via signed moment arms."""
    if forces.shape != (mset.n,):
        raise LengthMismatch(f"expected {mset.n} forces, got {forces.shape}")
    return mset.arm_matrix.T @ forces


def trunk_actuator_torques(excitations: np.ndarray, mset: MuscleSet) -> np.ndarray:
    """Two ideal trunk actuators acting between trunk and both thighs.

    excitations = (flexor, extensor) in [0, 1].  Each applies a torque couple
    whose reaction splits equally across the hips, so the generalized effect
    is a symmetric bilateral hip torque.
    """
    if np.shape(excitations) != (2,):
        raise LengthMismatch("expected 2 trunk excitations")
    e = np.clip(np.asarray(excitations, dtype=float), 0.0, 1.0)
    hip = (e[0] - e[1]) * mset.trunk_torque / 2.0
    tau = np.zeros(6)
    tau[JOINT_NAMES.index("hip_l")] = hip
    tau[JOINT_NAMES.index("hip_r")] = hip
    return tau


def update_muscles(state: SimState, activations: np.ndarray,
                   excitations: np.ndarray, dt: float, mset: MuscleSet):
    """One physics-substep muscle pipeline.

    Advances activations toward the excitations, evaluates geometry and
    forces at the current state, and returns
    (new activations, forces, joint torques).  Pure in its inputs.
    """
    excitations = np.asarray(excitations, dtype=float)
    if excitations.shape != (mset.n,):
        raise LengthMismatch(f"expected {mset.n} excitations, got {excitations.shape}")
    if np.any(excitations < 0.0) or np.any(excitations > 1.0):
        raise InvalidRange("excitations must lie in [0, 1]")
    new_act = advance_activations(np.asarray(activations, dtype=float),
                                  excitations, dt, mset)
    forces = muscle_forces(new_act, state.q[3:], state.qdot[3:], mset)
    return new_act, forces, joint_torques_from_muscles(forces, mset)
