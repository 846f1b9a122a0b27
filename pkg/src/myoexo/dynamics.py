"""Articulated planar rigid-body dynamics with spring-damper ground contact.

Equations of motion are assembled by projecting per-segment Newton-Euler
equations through analytic point Jacobians (all points are sums of
constant-amplitude link vectors, so Jacobians and centripetal terms are
closed-form trig sums).  Integration is semi-implicit Euler: velocities
update from accelerations at the old configuration, then positions update
with the new velocities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import NQ, BodyModel, SimState, Terrain, UnknownSegment


class NonFiniteState(FloatingPointError):
    """A coordinate became non-finite; the caller treats this as a fall."""


@dataclass
class Kinematics:
    """Everything the force and reward code needs about one configuration."""

    com_pos: np.ndarray        # (7, 2)
    com_vel: np.ndarray        # (7, 2)
    com_jac: np.ndarray        # (7, 2, 9)
    com_bias: np.ndarray       # (7, 2)  centripetal part of COM acceleration
    contact_pos: np.ndarray    # (4, 2) heel_l, toe_l, heel_r, toe_r
    contact_vel: np.ndarray    # (4, 2)
    contact_jac: np.ndarray    # (4, 2, 9)
    seg_angle: np.ndarray      # (7,)
    seg_angvel: np.ndarray     # (7,)


def evaluate_kinematics(state: SimState, model: BodyModel) -> Kinematics:
    q, qd = state.q, state.qdot
    ang, angd = q[2:], qd[2:]
    root, rootv = q[:2], qd[:2]

    psi = model.vec_chain @ ang + model.vec_beta
    psid = model.vec_chain @ angd
    s, c = np.sin(psi), np.cos(psi)
    vec = model.vec_amp[:, None] * np.stack([s, -c], axis=1)        # (nv, 2)
    dvec = model.vec_amp[:, None] * np.stack([c, s], axis=1)        # d vec / d psi
    velvec = dvec * psid[:, None]
    centri = -vec * (psid ** 2)[:, None]

    def points(P):
        pos = root + P @ vec
        vel = rootv + P @ velvec
        jac = np.zeros((P.shape[0], 2, NQ))
        jac[:, 0, 0] = 1.0
        jac[:, 1, 1] = 1.0
        jac[:, :, 2:] = np.einsum("pv,vx,vj->pxj", P, dvec, model.vec_chain)
        bias = P @ centri
        return pos, vel, jac, bias

    com_pos, com_vel, com_jac, com_bias = points(model.com_incidence)
    ct_pos, ct_vel, ct_jac, _ = points(model.contact_incidence)

    return Kinematics(
        com_pos, com_vel, com_jac, com_bias,
        ct_pos, ct_vel, ct_jac,
        model.segment_chain @ ang, model.segment_chain @ angd,
    )


def mass_matrix(model: BodyModel, kin: Kinematics) -> np.ndarray:
    m = model.segment_masses
    M = np.einsum("s,sxi,sxj->ij", m, kin.com_jac, kin.com_jac)
    M[2:, 2:] += model.angular_inertia
    return M


def _contact_update(state: SimState, model: BodyModel, terrain: Terrain,
                    kin: Kinematics):
    """Per-point contact forces (world frame) and updated tangential anchors.

    Normal: spring-damper clipped non-negative.  Tangential: anchored spring
    saturated at the friction cone; the anchor slides when saturated and
    resets when the point leaves the ground.
    """
    p = model.contact
    n, t = terrain.normal, terrain.tangent
    pos, vel = kin.contact_pos, kin.contact_vel

    origin = np.array([0.0, terrain.origin_height])
    dist = (pos - origin) @ n                    # signed height above surface
    pen = np.maximum(0.0, -dist)
    pen_rate = -(vel @ n)
    in_contact = pen > 0.0

    fn = np.where(in_contact,
                  np.maximum(0.0, p.stiffness * pen + p.damping * pen_rate),
                  0.0)

    s_coord = pos @ t
    anchors = state.contact_anchor.copy()
    fresh = in_contact & ~np.isfinite(anchors)
    anchors[fresh] = s_coord[fresh]
    anchors[~in_contact] = np.nan

    vt = vel @ t
    ft_raw = np.where(in_contact,
                      -p.tangent_stiffness * (s_coord - anchors)
                      - p.tangent_damping * vt,
                      0.0)
    ft_raw = np.nan_to_num(ft_raw)
    limit = p.friction_mu * fn
    ft = np.clip(ft_raw, -limit, limit)
    # sliding: let the anchor trail so the spring stays at the cone edge
    slid = in_contact & (np.abs(ft_raw) > limit)
    anchors[slid] = s_coord[slid] + (ft[slid] + p.tangent_damping * vt[slid]) / p.tangent_stiffness

    force = fn[:, None] * n + ft[:, None] * t
    damp_normal = in_contact & (fn > 0.0)
    damp_tangent = in_contact & ~slid
    return force, fn, ft, anchors, damp_normal, damp_tangent


def contact_point_forces(state: SimState, model: BodyModel, terrain: Terrain):
    """Per-point (heel_l, toe_l, heel_r, toe_r) contact forces.

    Returns (world force (4,2), normal (4,), tangential (4,)) without
    modifying contact memory.
    """
    kin = evaluate_kinematics(state, model)
    force, fn, ft, *_ = _contact_update(state, model, terrain, kin)
    return force, fn, ft


def contact_forces(state: SimState, model: BodyModel, terrain: Terrain):
    """Per-foot ground reaction forces as ((normal, tangential) left, right).

    Pure query: contact memory in `state` is not modified.
    """
    _, fn, ft, *_ = _contact_update(state, model, terrain,
                                    evaluate_kinematics(state, model))
    left = np.array([fn[0] + fn[1], ft[0] + ft[1]])
    right = np.array([fn[2] + fn[3], ft[2] + ft[3]])
    return left, right


def _limit_torques(model: BodyModel, q_joints, qd_joints):
    tau = np.zeros(6)
    for j, lim in enumerate(model.joint_limits):
        if q_joints[j] < lim.lo:
            tau[j] = model.limit_stiffness * (lim.lo - q_joints[j]) \
                - model.limit_damping * min(qd_joints[j], 0.0)
        elif q_joints[j] > lim.hi:
            tau[j] = -model.limit_stiffness * (q_joints[j] - lim.hi) \
                - model.limit_damping * max(qd_joints[j], 0.0)
    return tau


def step_dynamics(state: SimState, model: BodyModel, joint_torques: np.ndarray,
                  terrain: Terrain, dt: float,
                  root_wrench: np.ndarray | None = None) -> SimState:
    """Advance the state by one semi-implicit Euler step of size dt.

    `joint_torques` has one entry per anatomical joint.  `root_wrench`
    optionally applies (fx, fy, torque) at the pelvis; the scripted-rollout
    harness uses it, normal training never does.

    Raises NonFiniteState if the update produces a non-finite coordinate.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    joint_torques = np.asarray(joint_torques, dtype=float)
    if joint_torques.shape != (6,):
        raise ValueError("expected 6 joint torques")

    kin = evaluate_kinematics(state, model)
    M = mass_matrix(model, kin)
    m = model.segment_masses

    Q = np.zeros(NQ)
    # gravity at each segment COM
    Q -= model.gravity * np.einsum("s,si->i", m, kin.com_jac[:, 1, :])
    # generalized bias from centripetal COM accelerations
    bias = np.einsum("s,sxi,sx->i", m, kin.com_jac, kin.com_bias)
    # contact
    force, _, _, anchors, damp_n, damp_t = _contact_update(state, model, terrain, kin)
    Q += np.einsum("pxi,px->i", kin.contact_jac, force)
    # joint actuation and limits
    Q[3:] += joint_torques
    Q[3:] += _limit_torques(model, state.q[3:], state.qdot[3:])
    if root_wrench is not None:
        Q[:3] += np.asarray(root_wrench, dtype=float)

    # damping is handled implicitly in the velocity update: the stiff contact
    # and limit dampers would otherwise destabilize the explicit step for
    # light segments.  The added term is PSD, so A stays invertible.
    A = M.copy()
    p = model.contact
    n_out, t_out = terrain.normal, terrain.tangent
    for k in range(4):
        c = p.damping * damp_n[k]
        ct = p.tangent_damping * damp_t[k]
        if c or ct:
            Jn = n_out @ kin.contact_jac[k]
            Jt = t_out @ kin.contact_jac[k]
            A += dt * (c * np.outer(Jn, Jn) + ct * np.outer(Jt, Jt))
    for j, lim in enumerate(model.joint_limits):
        if state.q[3 + j] < lim.lo or state.q[3 + j] > lim.hi:
            A[3 + j, 3 + j] += dt * model.limit_damping

    rhs = Q - bias
    qdd = np.zeros(NQ)
    if model.pinned_root:
        qdd[3:] = np.linalg.solve(A[3:, 3:], rhs[3:])
    else:
        qdd = np.linalg.solve(A, rhs)

    qdot_new = state.qdot + dt * qdd
    q_new = state.q + dt * qdot_new
    new = SimState(q_new, qdot_new, state.t + dt, anchors)
    if not new.is_finite():
        raise NonFiniteState(f"non-finite state at t={state.t + dt:.4f}")
    new.qdd = qdd  # cached for reward/diagnostic consumers
    return new


def com_state(state: SimState, model: BodyModel):
    """Whole-body COM position and velocity (mass-weighted over segments)."""
    kin = evaluate_kinematics(state, model)
    m = model.segment_masses
    pos = (m[:, None] * kin.com_pos).sum(axis=0) / m.sum()
    vel = (m[:, None] * kin.com_vel).sum(axis=0) / m.sum()
    return pos, vel


def segment_angular_velocity(state: SimState, model: BodyModel, segment) -> float:
    """World-frame planar angular velocity of a segment (by name or index)."""
    idx = model.segment_index(segment) if isinstance(segment, str) else int(segment)
    if not 0 <= idx < len(model.segments):
        raise UnknownSegment(segment)
    return float(model.segment_chain[idx] @ state.qdot[2:])


def segment_angle(state: SimState, model: BodyModel, segment) -> float:
    idx = model.segment_index(segment) if isinstance(segment, str) else int(segment)
    if not 0 <= idx < len(model.segments):
        raise UnknownSegment(segment)
    return float(model.segment_chain[idx] @ state.q[2:])


def mechanical_energy(state: SimState, model: BodyModel) -> float:
    """Kinetic plus gravitational potential energy of the whole model."""
    kin = evaluate_kinematics(state, model)
    M = mass_matrix(model, kin)
    ke = 0.5 * state.qdot @ M @ state.qdot
    pe = model.gravity * float(model.segment_masses @ kin.com_pos[:, 1])
    return float(ke + pe)


def write_state_trace_csv(path, states, model: BodyModel, terrain: Terrain):
    """Dump a state trace with per-foot GRFs to CSV."""
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t"] + [f"q{i}" for i in range(NQ)]
                   + [f"qdot{i}" for i in range(NQ)]
                   + ["grf_left_n", "grf_left_t", "grf_right_n", "grf_right_t"])
        for st in states:
            left, right = contact_forces(st, model, terrain)
            w.writerow([repr(float(st.t))]
                       + [repr(float(x)) for x in st.q]
                       + [repr(float(x)) for x in st.qdot]
                       + [repr(float(v)) for v in (left[0], left[1], right[0], right[1])])


def knee_reaction_forces(state: SimState, model: BodyModel, terrain: Terrain,
                         qdd: np.ndarray):
    """Knee joint reaction force magnitudes (N), left and right.

    Inverse dynamics of the shank+foot subsystem: the knee carries the
    subsystem's inertial force minus gravity and the ground reaction.
    """
    kin = evaluate_kinematics(state, model)
    force, *_ = _contact_update(state, model, terrain, kin)
    m = model.segment_masses
    out = []
    for side, segs, ct in (("l", (2, 3), (0, 1)), ("r", (5, 6), (2, 3))):
        acc = kin.com_jac[segs, :, :] @ qdd + kin.com_bias[segs, :]
        inertial = (m[list(segs)][:, None] * acc).sum(axis=0)
        grav = np.array([0.0, -model.gravity * m[list(segs)].sum()])
        grf = force[list(ct)].sum(axis=0)
        out.append(float(np.linalg.norm(inertial - grav - grf)))
    return out[0], out[1]
