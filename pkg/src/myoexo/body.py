"""Planar 7-segment biped description: segments, joints, device masses,
terrain, and the link-vector tables the dynamics engine consumes.

Generalized coordinates (9): pelvis x, pelvis y, trunk angle (CCW, 0 =
upright), then six anatomical joint angles in the order
[hip_l, knee_l, ankle_l, hip_r, knee_r, ankle_r].  Hip flexion, knee
flexion, and ankle dorsiflexion are positive.  World x points in the
walking direction, y up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81

SEGMENT_NAMES = ("trunk", "thigh_l", "shank_l", "foot_l",
                 "thigh_r", "shank_r", "foot_r")
JOINT_NAMES = ("hip_l", "knee_l", "ankle_l", "hip_r", "knee_r", "ankle_r")

NQ = 9          # 3 trunk + 6 joints
N_SEGMENTS = 7
N_JOINTS = 6


class UnknownSegment(KeyError):
    pass


@dataclass
class SegmentSpec:
    name: str
    mass: float                 # kg, device augmentation included
    inertia: float              # kg m^2 about COM
    length: float               # m, proximal joint to distal joint
    com_offset: float           # m along the segment from the proximal joint

    def __post_init__(self):
        if self.mass <= 0 or self.inertia <= 0 or self.length <= 0:
            raise ValueError(f"segment {self.name}: mass/inertia/length must be positive")


@dataclass
class ContactParams:
    stiffness: float = 30000.0      # N/m, per contact point
    damping: float = 1000.0         # N s/m, clipped so normal force >= 0
    friction_mu: float = 0.9
    tangent_stiffness: float = 20000.0   # N/m anchor spring
    tangent_damping: float = 400.0       # N s/m


@dataclass
class JointLimit:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("joint limit must satisfy lo < hi")


@dataclass
class Terrain:
    slope_deg: float = 0.0
    origin_height: float = 0.0

    def __post_init__(self):
        if not -5.0 <= self.slope_deg <= 5.0:
            raise ValueError("slope must lie within [-5, +5] degrees")

    @property
    def slope_rad(self) -> float:
        return math.radians(self.slope_deg)

    def surface_height(self, x):
        return self.origin_height + math.tan(self.slope_rad) * x

    @property
    def normal(self) -> np.ndarray:
        s = self.slope_rad
        return np.array([-math.sin(s), math.cos(s)])

    @property
    def tangent(self) -> np.ndarray:
        s = self.slope_rad
        return np.array([math.cos(s), math.sin(s)])


@dataclass
class BodyModel:
    """Segment table plus the precomputed kinematic structure.

    Build instances through :func:`standard_biped` (or a custom factory in
    tests); `__post_init__` derives every table the dynamics engine needs.
    """

    segments: list[SegmentSpec]
    joint_limits: list[JointLimit]
    device_masses: dict[str, float] = field(default_factory=dict)
    contact: ContactParams = field(default_factory=ContactParams)
    gravity: float = GRAVITY
    foot_heel_back: float = 0.07     # m behind the ankle
    foot_toe_front: float = 0.15     # m ahead of the ankle
    foot_sole_drop: float = 0.06     # m below the ankle
    limit_stiffness: float = 200.0   # Nm/rad beyond a limit
    limit_damping: float = 2.0       # Nm s/rad, only while violating
    pinned_root: bool = False        # freeze pelvis coords (test harness)

    def __post_init__(self):
        if len(self.segments) != N_SEGMENTS:
            raise ValueError(f"expected {N_SEGMENTS} segments")
        if len(self.joint_limits) != N_JOINTS:
            raise ValueError(f"expected {N_JOINTS} joint limits")
        self._build_kinematics()

    # -- mass bookkeeping ---------------------------------------------------

    @property
    def segment_masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.segments])

    @property
    def total_mass(self) -> float:
        return float(self.segment_masses.sum())

    def segment_index(self, name: str) -> int:
        try:
            return SEGMENT_NAMES.index(name)
        except ValueError:
            raise UnknownSegment(name) from None

    # -- kinematic tables ---------------------------------------------------
    #
    # Every point of interest is pelvis + a sum of "link vectors", each of
    # the form a * [sin(psi + beta), -cos(psi + beta)] where psi is a fixed
    # +/-1 combination of the 7 angle coordinates.  The tables below let the
    # engine evaluate positions, Jacobians, and centripetal terms with a few
    # dense einsums.

    def _build_kinematics(self):
        trunk, thigh_l, shank_l, foot_l, thigh_r, shank_r, foot_r = self.segments

        # chain rows over angle coords [trunk, hip_l, knee_l, ankle_l, hip_r, knee_r, ankle_r]
        ch_trunk = np.array([1., 0, 0, 0, 0, 0, 0])
        ch_th_l = np.array([1., 1, 0, 0, 0, 0, 0])
        ch_sh_l = np.array([1., 1, -1, 0, 0, 0, 0])
        ch_ft_l = np.array([1., 1, -1, 1, 0, 0, 0])
        ch_th_r = np.array([1., 0, 0, 0, 1, 0, 0])
        ch_sh_r = np.array([1., 0, 0, 0, 1, -1, 0])
        ch_ft_r = np.array([1., 0, 0, 0, 1, -1, 1])

        def polar(dx, dy):
            # local offset (dx, dy) from the owning joint, expressed as
            # (amplitude, beta) so that R(psi) @ (dx, dy) = a*[sin(psi+b), -cos(psi+b)]
            return math.hypot(dx, dy), math.atan2(dx, -dy)

        # link vectors: (amplitude, beta, chain row)
        vecs = []

        def add(a, beta, chain):
            vecs.append((a, beta, chain))
            return len(vecs) - 1

        v_trunk_com = add(trunk.com_offset, math.pi, ch_trunk)   # points up at 0
        foot_com_a, foot_com_b = polar(foot_l.com_offset, -self.foot_sole_drop / 2)
        heel_a, heel_b = polar(-self.foot_heel_back, -self.foot_sole_drop)
        toe_a, toe_b = polar(self.foot_toe_front, -self.foot_sole_drop)

        idx = {}
        for side, ch_th, ch_sh, ch_ft, thigh, shank, foot in (
                ("l", ch_th_l, ch_sh_l, ch_ft_l, thigh_l, shank_l, foot_l),
                ("r", ch_th_r, ch_sh_r, ch_ft_r, thigh_r, shank_r, foot_r)):
            idx[f"thigh_com_{side}"] = add(thigh.com_offset, 0.0, ch_th)
            idx[f"thigh_full_{side}"] = add(thigh.length, 0.0, ch_th)
            idx[f"shank_com_{side}"] = add(shank.com_offset, 0.0, ch_sh)
            idx[f"shank_full_{side}"] = add(shank.length, 0.0, ch_sh)
            idx[f"foot_com_{side}"] = add(foot_com_a, foot_com_b, ch_ft)
            idx[f"heel_{side}"] = add(heel_a, heel_b, ch_ft)
            idx[f"toe_{side}"] = add(toe_a, toe_b, ch_ft)

        n_vec = len(vecs)
        self.vec_amp = np.array([v[0] for v in vecs])
        self.vec_beta = np.array([v[1] for v in vecs])
        self.vec_chain = np.stack([v[2] for v in vecs])          # (n_vec, 7)

        def point(*vec_ids):
            row = np.zeros(n_vec)
            row[list(vec_ids)] = 1.0
            return row

        # COM points, in segment order
        com_rows = [
            point(v_trunk_com),
            point(idx["thigh_com_l"]),
            point(idx["thigh_full_l"], idx["shank_com_l"]),
            point(idx["thigh_full_l"], idx["shank_full_l"], idx["foot_com_l"]),
            point(idx["thigh_com_r"]),
            point(idx["thigh_full_r"], idx["shank_com_r"]),
            point(idx["thigh_full_r"], idx["shank_full_r"], idx["foot_com_r"]),
        ]
        self.com_incidence = np.stack(com_rows)                  # (7, n_vec)

        # contact points: heel_l, toe_l, heel_r, toe_r
        contact_rows = [
            point(idx["thigh_full_l"], idx["shank_full_l"], idx["heel_l"]),
            point(idx["thigh_full_l"], idx["shank_full_l"], idx["toe_l"]),
            point(idx["thigh_full_r"], idx["shank_full_r"], idx["heel_r"]),
            point(idx["thigh_full_r"], idx["shank_full_r"], idx["toe_r"]),
        ]
        self.contact_incidence = np.stack(contact_rows)          # (4, n_vec)

        # joint anchor points: knee_l, ankle_l, knee_r, ankle_r (pelvis is the hip)
        joint_rows = [
            point(idx["thigh_full_l"]),
            point(idx["thigh_full_l"], idx["shank_full_l"]),
            point(idx["thigh_full_r"]),
            point(idx["thigh_full_r"], idx["shank_full_r"]),
        ]
        self.joint_point_incidence = np.stack(joint_rows)

        # segment world-angle chain rows, segment order
        self.segment_chain = np.stack(
            [ch_trunk, ch_th_l, ch_sh_l, ch_ft_l, ch_th_r, ch_sh_r, ch_ft_r])

        inertias = np.array([s.inertia for s in self.segments])
        # angular part of the mass matrix is configuration independent
        self.angular_inertia = self.segment_chain.T @ (inertias[:, None] * self.segment_chain)


@dataclass
class SimState:
    """Dynamic truth: generalized coordinates/velocities plus contact memory."""

    q: np.ndarray                     # (9,)
    qdot: np.ndarray                  # (9,)
    t: float = 0.0
    contact_anchor: np.ndarray = None  # (4,) tangential anchors, nan when airborne

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qdot = np.asarray(self.qdot, dtype=float)
        if self.q.shape != (NQ,) or self.qdot.shape != (NQ,):
            raise ValueError(f"q and qdot must have shape ({NQ},)")
        if self.contact_anchor is None:
            self.contact_anchor = np.full(4, np.nan)
        else:
            self.contact_anchor = np.asarray(self.contact_anchor, dtype=float)

    def copy(self) -> "SimState":
        return SimState(self.q.copy(), self.qdot.copy(), self.t,
                        self.contact_anchor.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot)))


def standard_biped(device_attached: bool = True,
                   contact: ContactParams | None = None) -> BodyModel:
    """The default 74.5 kg human model, optionally carrying the 4.3 kg device.

    Device mass augmentation: +0.5 kg per thigh and +3.3 kg on the trunk
    (pelvis + torso equivalent); segment inertias scale with the added mass.
    """
    base = {
        "trunk": (49.7, 2.80, 0.80, 0.35),
        "thigh": (7.9, 0.14, 0.44, 0.19),
        "shank": (3.3, 0.048, 0.43, 0.19),
        "foot": (1.2, 0.005, 0.22, 0.05),
    }
    device = {"trunk": 3.3, "thigh_l": 0.5, "thigh_r": 0.5} if device_attached else {}

    def seg(name, kind):
        m, i, ln, c = base[kind]
        extra = device.get(name, 0.0)
        scale = (m + extra) / m
        return SegmentSpec(name, m + extra, i * scale, ln, c)

    segments = [
        seg("trunk", "trunk"),
        seg("thigh_l", "thigh"), seg("shank_l", "shank"), seg("foot_l", "foot"),
        seg("thigh_r", "thigh"), seg("shank_r", "shank"), seg("foot_r", "foot"),
    ]
    d = math.radians
    limits = [
        JointLimit(d(-30), d(120)),   # hip flexion
        JointLimit(d(0), d(150)),     # knee flexion (0 = straight)
        JointLimit(d(-45), d(30)),    # ankle dorsiflexion
    ] * 2
    return BodyModel(segments, limits, device_masses=device,
                     contact=contact or ContactParams())


def standing_pose(model: BodyModel, terrain: Terrain | None = None) -> SimState:
    """Straight-legged standing state with feet resting at the surface."""
    terrain = terrain or Terrain()
    thigh, shank = model.segments[1], model.segments[2]
    leg = thigh.length + shank.length
    pelvis_y = terrain.surface_height(0.0) + leg + model.foot_sole_drop
    q = np.zeros(NQ)
    q[0], q[1] = 0.0, pelvis_y
    return SimState(q, np.zeros(NQ))
