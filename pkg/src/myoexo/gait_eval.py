"""Gait-cycle analysis: heel-strike detection from vertical GRF, 101-point
cycle normalization, waveform agreement statistics, peak timing with
circular lag wrapping, and whole-rollout assistance-effect metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

CYCLE_POINTS = 101


class NoEvents(ValueError):
    pass


class InsufficientStrides(ValueError):
    pass


class RolloutTooShort(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass
class GaitWaveform:
    samples: np.ndarray            # (101,) over 0..100% of the gait cycle
    units: str = ""
    n_strides: int = 1
    stride_duration: float = float("nan")   # s, mean over source strides
    condition: tuple = (0.0, 0.0)           # (slope deg, speed m/s)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != (CYCLE_POINTS,):
            raise ValueError(f"waveform must have {CYCLE_POINTS} points")
        if self.n_strides < 1:
            raise ValueError("waveform needs at least one source stride")


def detect_gait_events(grf: np.ndarray, threshold: float,
                       sample_rate_hz: float,
                       refractory_s: float = 0.3) -> np.ndarray:
    """Indices where the vertical GRF crosses the threshold upward.

    Crossings within the refractory period of the previous strike are
    ignored (contact chatter).  Raises NoEvents for fewer than 2 strikes.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    grf = np.asarray(grf, dtype=float)
    above = grf >= threshold
    rising = np.where(above[1:] & ~above[:-1])[0] + 1
    refractory = int(round(refractory_s * sample_rate_hz))
    events = []
    for idx in rising:
        if not events or idx - events[-1] >= refractory:
            events.append(int(idx))
    if len(events) < 2:
        raise NoEvents(f"found {len(events)} threshold crossings")
    return np.asarray(events)


def normalize_cycle(signal: np.ndarray, events: np.ndarray,
                    n_cycles: int = 5, units: str = "",
                    sample_rate_hz: float | None = None,
                    condition=(0.0, 0.0)) -> GaitWaveform:
    """Average the last `n_cycles` strides, each resampled to 101 points."""
    signal = np.asarray(signal, dtype=float)
    events = np.asarray(events, dtype=int)
    if len(events) < n_cycles + 1:
        raise InsufficientStrides(
            f"{len(events)} events give {len(events) - 1} strides; "
            f"need {n_cycles}")
    events = events[-(n_cycles + 1):]
    phase = np.linspace(0.0, 1.0, CYCLE_POINTS)
    stacked = np.empty((n_cycles, CYCLE_POINTS))
    durations = []
    for k in range(n_cycles):
        a, b = events[k], events[k + 1]
        src = np.arange(a, b + 1)
        stacked[k] = np.interp(a + phase * (b - a), src, signal[a:b + 1])
        durations.append(b - a)
    duration_s = (float(np.mean(durations)) / sample_rate_hz
                  if sample_rate_hz else float("nan"))
    return GaitWaveform(stacked.mean(axis=0), units=units, n_strides=n_cycles,
                        stride_duration=duration_s, condition=tuple(condition))


def waveform_stats(a: GaitWaveform, b: GaitWaveform):
    """(Pearson r, RMSE).  r is nan when either waveform has zero variance."""
    if a.units and b.units and a.units != b.units:
        raise ValueError(f"unit mismatch: {a.units!r} vs {b.units!r}")
    x, y = a.samples, b.samples
    rmse = float(np.sqrt(np.mean((x - y) ** 2)))
    sx, sy = x.std(), y.std()
    if sx == 0.0 or sy == 0.0:
        return float("nan"), rmse
    r = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return r, rmse


def peak_timing(w: GaitWaveform):
    """(extension peak %, flexion peak %) = (argmin, argmax) of the cycle.

    Ties break toward the earliest index.
    """
    ext = int(np.argmin(w.samples))
    flx = int(np.argmax(w.samples))
    return float(ext), float(flx)


def _wrap_percent(x: float) -> float:
    """Wrap a cycle-percentage difference into (-50, +50]."""
    return 50.0 - ((50.0 - x) % 100.0)


def peak_lag(bio: GaitWaveform, exo: GaitWaveform, stride_duration_s: float):
    """Timing lag (ms) of the assistance peaks behind the biological peaks,
    circularly wrapped so boundary peaks do not alias a full cycle."""
    bio_ext, bio_flx = peak_timing(bio)
    exo_ext, exo_flx = peak_timing(exo)
    to_ms = stride_duration_s * 1000.0 / 100.0
    return (_wrap_percent(exo_ext - bio_ext) * to_ms,
            _wrap_percent(exo_flx - bio_flx) * to_ms)


def mean_activation(activations: np.ndarray, sample_rate_hz: float,
                    window_s: float = 15.0, discard_s: float = 2.0) -> float:
    """Time-and-muscle mean activation over a steady-state window."""
    act = np.atleast_2d(np.asarray(activations, dtype=float))
    start = int(round(discard_s * sample_rate_hz))
    n = int(round(window_s * sample_rate_hz))
    if act.shape[0] < start + n:
        raise RolloutTooShort(
            f"need {start + n} samples, got {act.shape[0]}")
    return float(act[start:start + n].mean())


def mean_positive_power(joint_torques: np.ndarray, joint_velocities: np.ndarray,
                        body_mass: float, sample_rate_hz: float,
                        window_s: float = 15.0, discard_s: float = 2.0) -> float:
    """Mean over time of the summed positive joint power, W/kg."""
    tau = np.atleast_2d(np.asarray(joint_torques, dtype=float))
    omega = np.atleast_2d(np.asarray(joint_velocities, dtype=float))
    if tau.shape != omega.shape:
        raise ValueError("torque and velocity logs must align")
    start = int(round(discard_s * sample_rate_hz))
    n = int(round(window_s * sample_rate_hz))
    if tau.shape[0] < start + n:
        raise RolloutTooShort(f"need {start + n} samples, got {tau.shape[0]}")
    power = np.maximum(tau[start:start + n] * omega[start:start + n], 0.0)
    return float(power.sum(axis=1).mean() / body_mass)


@dataclass
class EffectReport:
    """Per-condition assistance effects and speed-correlation statistics."""

    conditions: list                    # (slope, speed) tuples
    activation_baseline: dict
    activation_assisted: dict
    power_baseline: dict
    power_assisted: dict
    activation_reduction_pct: dict = field(default_factory=dict)
    power_reduction_pct: dict = field(default_factory=dict)
    speed_corr_activation: float = float("nan")
    speed_corr_power: float = float("nan")


def _pearson(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or x.std() == 0 or y.std() == 0:
        return float("nan")
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (x.std() * y.std()))


def assistance_effect(assisted: dict, baseline: dict) -> EffectReport:
    """Percent reductions per matched condition plus speed correlations.

    `assisted`/`baseline` map (slope, speed) -> dict with keys
    "mean_activation" and "mean_positive_power".
    """
    if set(assisted) != set(baseline):
        raise GridMismatch(
            f"condition grids differ: {sorted(set(assisted) ^ set(baseline))}")
    conds = sorted(assisted)
    report = EffectReport(
        conditions=conds,
        activation_baseline={c: baseline[c]["mean_activation"] for c in conds},
        activation_assisted={c: assisted[c]["mean_activation"] for c in conds},
        power_baseline={c: baseline[c]["mean_positive_power"] for c in conds},
        power_assisted={c: assisted[c]["mean_positive_power"] for c in conds},
    )
    for c in conds:
        ab, aa = report.activation_baseline[c], report.activation_assisted[c]
        pb, pa = report.power_baseline[c], report.power_assisted[c]
        report.activation_reduction_pct[c] = (
            (ab - aa) / ab * 100.0 if ab else float("nan"))
        report.power_reduction_pct[c] = (
            (pb - pa) / pb * 100.0 if pb else float("nan"))
    speeds = [c[1] for c in conds]
    report.speed_corr_activation = _pearson(
        speeds, [report.activation_reduction_pct[c] for c in conds])
    report.speed_corr_power = _pearson(
        speeds, [report.power_reduction_pct[c] for c in conds])
    return report


def write_effect_csv(path, report: EffectReport) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["slope_deg", "speed", "activation_baseline",
                    "activation_assisted", "activation_reduction_pct",
                    "power_baseline_wkg", "power_assisted_wkg",
                    "power_reduction_pct"])
        for c in report.conditions:
            w.writerow([repr(float(x)) for x in (
                c[0], c[1],
                report.activation_baseline[c], report.activation_assisted[c],
                report.activation_reduction_pct[c],
                report.power_baseline[c], report.power_assisted[c],
                report.power_reduction_pct[c])])
        w.writerow([])
        w.writerow(["speed_corr_activation", repr(report.speed_corr_activation)])
        w.writerow(["speed_corr_power", repr(report.speed_corr_power)])


def write_waveform_bundle(path, waveforms: dict) -> None:
    """Plot-data bundle: one column per condition plus the pooled mean."""
    conds = sorted(waveforms)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["cycle_pct"]
                   + [f"slope{c[0]:+g}_speed{c[1]:g}" for c in conds]
                   + ["mean"])
        stack = np.stack([waveforms[c].samples for c in conds]) if conds else \
            np.zeros((0, CYCLE_POINTS))
        mean = stack.mean(axis=0) if len(conds) else np.full(CYCLE_POINTS, np.nan)
        for i in range(CYCLE_POINTS):
            w.writerow([repr(float(i))]
                       + [repr(float(waveforms[c].samples[i])) for c in conds]
                       + [repr(float(mean[i]))])
