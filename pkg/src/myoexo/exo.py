"""Exoskeleton command shaping: clamp, rate limit, mass scaling, low-pass
filtering, and hard torque saturation.

The full path from a raw policy output in [-1, 1] to the torque applied at
the hip is: clamp -> rate limit (normalized units, per control tick) ->
scale to Nm by the peak torque -> body-mass scaling -> first-order low-pass
(applied at the physics rate with the command held between control ticks)
-> saturation at the peak torque.  All functions broadcast over numpy
arrays so many independent command streams can be shaped at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REFERENCE_BODY_MASS_KG = 74.5


class InvalidTimeConstant(ValueError):
    pass


@dataclass
class ExoPipelineConfig:
    """Shaping constants for one actuator channel (or a vector of them)."""

    tau_lpf: float = 0.1        # filter time constant, s
    dt: float = 0.005           # filter update period, s
    t_max: float = 12.0         # peak torque magnitude, Nm
    rate_limit_c: float = 0.5   # max |command change| per control tick, normalized
    subject_mass: float = REFERENCE_BODY_MASS_KG
    reference_mass: float = REFERENCE_BODY_MASS_KG

    def __post_init__(self):
        if not (0.0 < self.dt <= self.tau_lpf):
            raise InvalidTimeConstant(
                f"need 0 < dt <= tau_lpf, got dt={self.dt}, tau_lpf={self.tau_lpf}"
            )
        if self.t_max <= 0 or self.rate_limit_c <= 0:
            raise ValueError("t_max and rate_limit_c must be positive")
        if self.subject_mass <= 0 or self.reference_mass <= 0:
            raise ValueError("masses must be positive")

    @property
    def alpha(self) -> float:
        return alpha_from(self.dt, self.tau_lpf)


@dataclass
class ExoPipelineState:
    """Filter memory and the previous pre-filter command (for rate limiting)."""

    u_prev_filtered: np.ndarray | float = 0.0  # last filter output, Nm
    u_prev_cmd: np.ndarray | float = 0.0       # last clamped+rate-limited command, normalized

    def copy(self) -> "ExoPipelineState":
        return ExoPipelineState(np.copy(self.u_prev_filtered), np.copy(self.u_prev_cmd))


def alpha_from(dt: float, tau_lpf: float) -> float:
    """Smoothing coefficient of the discrete first-order filter, dt / tau."""
    if dt <= 0 or tau_lpf <= 0 or dt > tau_lpf:
        raise InvalidTimeConstant(
            f"need 0 < dt <= tau_lpf, got dt={dt}, tau_lpf={tau_lpf}"
        )
    return dt / tau_lpf


def lpf_step(u_prev, u_cmd, alpha):
    """One filter update: u = u_prev + alpha * (u_cmd - u_prev)."""
    return u_prev + alpha * (u_cmd - u_prev)


def rate_limit(u, u_prev, c):
    """Clip the command into [u_prev - c, u_prev + c]."""
    return np.clip(u, u_prev - c, u_prev + c)


def scale_torque(u_cmd, m_subject, m_reference=REFERENCE_BODY_MASS_KG):
    """Scale a command by the subject-to-reference body-mass ratio."""
    return u_cmd * (m_subject / m_reference)


def shape_command(raw, state: ExoPipelineState, cfg: ExoPipelineConfig):
    """Clamp + rate-limit a raw command and convert it to a pre-filter Nm
    command.  Updates ``state.u_prev_cmd``.  Called once per control tick.
    """
    clamped = np.clip(raw, -1.0, 1.0)
    limited = rate_limit(clamped, state.u_prev_cmd, cfg.rate_limit_c)
    state.u_prev_cmd = limited
    u_nm = limited * cfg.t_max
    return scale_torque(u_nm, cfg.subject_mass, cfg.reference_mass)


def filter_substep(u_cmd_nm, state: ExoPipelineState, cfg: ExoPipelineConfig):
    """Advance the low-pass filter by one dt and saturate at +/- t_max.

    Updates ``state.u_prev_filtered``; returns the applied torque in Nm.
    """
    u = lpf_step(state.u_prev_filtered, u_cmd_nm, cfg.alpha)
    u = np.clip(u, -cfg.t_max, cfg.t_max)
    state.u_prev_filtered = u
    return u


def pipeline_step(raw, state: ExoPipelineState, cfg: ExoPipelineConfig):
    """One full shaping step at the filter rate: raw command in, applied Nm out.

    Returns (applied torque, state); `state` is mutated in place and also
    returned for convenience.
    """
    u_cmd_nm = shape_command(raw, state, cfg)
    return filter_substep(u_cmd_nm, state, cfg), state
