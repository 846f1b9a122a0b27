"""Per-tick reward: weighted sum of velocity tracking, effort, range of
motion, knee load, exo command smoothness, and a one-time fall penalty.

Velocity tracking is a product of normalized Gaussians (forward speed with a
flat tolerance band around the target, surface-normal speed, trunk pitch,
trunk pitch rate), so its component value lies in [0, 1] with the maximum at
steady target-speed upright walking.  All other components are penalties
(<= 0) before weighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RewardWeights:
    w_vel: float = 1.0
    w_eff: float = 0.2
    w_rom: float = 0.1
    w_sm: float = 0.05
    w_fall: float = 100.0
    w_knee: float = 0.1
    # velocity-term shape
    flat_halfwidth: float = 0.05          # m/s tolerance around the target
    sigma_forward: float = 0.3            # m/s
    sigma_normal: float = 0.3             # m/s
    sigma_pitch: float = math.radians(15.0)
    sigma_pitch_rate: float = math.radians(60.0)
    # range-of-motion bounds
    lumbar_lo: float = math.radians(-30.0)
    lumbar_hi: float = math.radians(2.5)
    # stance knee load threshold, bodyweights
    knee_load_limit_bw: float = 3.0

    def __post_init__(self):
        for name in ("w_vel", "w_eff", "w_rom", "w_sm", "w_fall", "w_knee"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.flat_halfwidth < 0:
            raise ValueError("flat_halfwidth must be >= 0")


@dataclass
class StepSnapshot:
    """Post-step quantities the reward needs, in surface-aligned axes."""

    forward_speed: float          # COM speed along the slope, m/s
    normal_speed: float           # COM speed perpendicular to the slope, m/s
    trunk_pitch: float            # rad, 0 = upright (positive = backward lean)
    trunk_pitch_rate: float       # rad/s
    knee_angles: np.ndarray       # (2,) rad, flexion positive
    knee_loads_bw: np.ndarray     # (2,) joint reaction magnitude / body weight
    activations: np.ndarray       # muscle activations plus trunk excitations
    exo_cmd_delta: np.ndarray     # (2,) change of normalized command this tick
    fell: bool = False


def _gauss(x, sigma):
    return math.exp(-0.5 * (x / sigma) ** 2)


def compute_reward(snap: StepSnapshot, weights: RewardWeights,
                   target_speed: float):
    """Return (reward, component breakdown before weighting)."""
    w = weights
    err = abs(snap.forward_speed - target_speed) - w.flat_halfwidth
    r_vel = (_gauss(max(err, 0.0), w.sigma_forward)
             * _gauss(snap.normal_speed, w.sigma_normal)
             * _gauss(snap.trunk_pitch, w.sigma_pitch)
             * _gauss(snap.trunk_pitch_rate, w.sigma_pitch_rate))

    r_eff = -float(np.sum(np.square(snap.activations)))

    hyper = np.maximum(0.0, -snap.knee_angles)
    lumbar_excess = max(0.0, snap.trunk_pitch - w.lumbar_hi) \
        + max(0.0, w.lumbar_lo - snap.trunk_pitch)
    r_rom = -float(np.sum(hyper ** 2)) - lumbar_excess ** 2

    overload = np.maximum(0.0, snap.knee_loads_bw - w.knee_load_limit_bw)
    r_knee = -float(np.sum(overload ** 2))

    r_sm = -float(np.sum(np.square(snap.exo_cmd_delta)))

    r_fall = -1.0 if snap.fell else 0.0

    breakdown = {
        "vel": r_vel, "eff": r_eff, "rom": r_rom,
        "sm": r_sm, "fall": r_fall, "knee": r_knee,
    }
    reward = (w.w_vel * r_vel + w.w_eff * r_eff + w.w_rom * r_rom
              + w.w_sm * r_sm + w.w_fall * r_fall + w.w_knee * r_knee)
    return reward, breakdown
