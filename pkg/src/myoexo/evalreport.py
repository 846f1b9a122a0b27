"""Grid evaluation: deterministic rollouts of the assisted and baseline
policies over matched (slope, speed) conditions, assistance-effect metrics,
gait-cycle waveform bundles, peak-timing analysis, and optional closed-loop
student agreement."""

from __future__ import annotations

import csv
import os

import numpy as np

from .config import RunConfig, load_config, make_env_factory, save_config
from .gait_eval import (
    GridMismatch,
    InsufficientStrides,
    NoEvents,
    RolloutTooShort,
    assistance_effect,
    detect_gait_events,
    mean_activation,
    mean_positive_power,
    normalize_cycle,
    peak_lag,
    peak_timing,
    waveform_stats,
    write_effect_csv,
    write_waveform_bundle,
)
from .rollout import policy_rollout, write_episode_csv
from .rng import substream
from .synergy import load_basis_csv


def _rollout_metrics(log, cfg: RunConfig, body_mass: float):
    rate = cfg.env.control_hz
    out = {}
    try:
        out["mean_activation"] = mean_activation(
            log.asarray("activations"), rate,
            window_s=cfg.eval.window_s, discard_s=cfg.eval.discard_s)
        out["mean_positive_power"] = mean_positive_power(
            log.asarray("bio_joint_torques"), log.asarray("joint_velocities"),
            body_mass, rate,
            window_s=cfg.eval.window_s, discard_s=cfg.eval.discard_s)
    except RolloutTooShort:
        out["mean_activation"] = float("nan")
        out["mean_positive_power"] = float("nan")
    return out


def _cycle_waveform(log, channel: np.ndarray, cfg: RunConfig, units: str):
    """Gait-normalize one per-tick channel using right-foot heel strikes."""
    rate = cfg.env.control_hz
    grf_right_n = log.asarray("grf")[:, 2]
    events = detect_gait_events(grf_right_n, cfg.eval.grf_threshold_n, rate,
                                cfg.eval.refractory_s)
    return normalize_cycle(channel, events, n_cycles=cfg.eval.n_cycles,
                           units=units, sample_rate_hz=rate,
                           condition=(log.slope_deg, log.target_speed))


def run_evaluation(cfg: RunConfig, assisted_dir: str, baseline_dir: str,
                   student_ckpt: str | None = None) -> str:
    from .cli import _load_actor_policy

    cfg_a = load_config(os.path.join(assisted_dir, "config.yaml"))
    cfg_b = load_config(os.path.join(baseline_dir, "config.yaml"))
    if (tuple(cfg_a.eval.slopes) != tuple(cfg_b.eval.slopes)
            or tuple(cfg_a.eval.speeds) != tuple(cfg_b.eval.speeds)):
        raise GridMismatch("assisted and baseline runs use different grids")

    run_dir = os.path.join(cfg.out_dir, "eval")
    os.makedirs(run_dir, exist_ok=True)
    os.makedirs(os.path.join(run_dir, "episodes"), exist_ok=True)
    save_config(os.path.join(run_dir, "config.yaml"), cfg)

    action_a, _ = _load_actor_policy(assisted_dir)
    action_b, _ = _load_actor_policy(baseline_dir)
    basis = load_basis_csv(os.path.join(assisted_dir, "basis.csv"))
    import shutil
    shutil.copyfile(os.path.join(assisted_dir, "basis.csv"),
                    os.path.join(run_dir, "basis.csv"))
    factory = make_env_factory(cfg_a, basis=basis)
    body_mass = factory(substream(0, "probe")).model.total_mass

    student = None
    norm = (0.0, 1.0)
    if student_ckpt:
        from .netcore import load_net

        student, meta = load_net(student_ckpt)
        extra = meta.get("extra", {})
        norm = (extra.get("norm_mean", 0.0), extra.get("norm_std", 1.0))

    ticks = int(round(cfg.eval.rollout_s * cfg.env.control_hz))
    assisted_metrics, baseline_metrics = {}, {}
    exo_waves, bio_waves, student_waves = {}, {}, {}
    peak_rows, agreement_rows = [], []

    for slope in cfg.eval.slopes:
        for speed in cfg.eval.speeds:
            cond = (float(slope), float(speed))
            stream = f"eval/{slope:+g}/{speed:g}"
            env = factory(substream(cfg.seed, stream))
            log_a = policy_rollout(env, action_a, ticks, slope, speed, "2a")
            env = factory(substream(cfg.seed, stream))
            log_b = policy_rollout(env, action_b, ticks, slope, speed, "2b")
            assisted_metrics[cond] = _rollout_metrics(log_a, cfg, body_mass)
            baseline_metrics[cond] = _rollout_metrics(log_b, cfg, body_mass)

            for tag, log in (("assisted", log_a), ("baseline", log_b)):
                write_episode_csv(
                    os.path.join(run_dir, "episodes",
                                 f"{tag}_s{slope:+g}_v{speed:g}.csv"),
                    log, meta={"seed": cfg.seed, "stream": stream,
                               "stage": "2a" if tag == "assisted" else "2b",
                               "kind": "teacher"},
                    body_mass=body_mass)

            try:
                exo_w = _cycle_waveform(
                    log_a, log_a.asarray("exo_torque")[:, 1], cfg, "Nm")
                bio_w = _cycle_waveform(
                    log_a, log_a.asarray("bio_joint_torques")[:, 3], cfg, "Nm")
                exo_waves[cond], bio_waves[cond] = exo_w, bio_w
                ext_pct, flx_pct = peak_timing(exo_w)
                lag_ext, lag_flx = peak_lag(bio_w, exo_w, exo_w.stride_duration)
                peak_rows.append((slope, speed, ext_pct, flx_pct,
                                  lag_ext, lag_flx))
            except (NoEvents, InsufficientStrides):
                peak_rows.append((slope, speed) + (float("nan"),) * 4)

            if student is not None:
                from .distill import closed_loop_student_rollout

                env = factory(substream(cfg.seed, stream))
                log_s = closed_loop_student_rollout(
                    student, env, action_a, slope, speed, cfg.eval.rollout_s,
                    norm[0], norm[1])
                write_episode_csv(
                    os.path.join(run_dir, "episodes",
                                 f"student_s{slope:+g}_v{speed:g}.csv"),
                    log_s, meta={"seed": cfg.seed, "stream": stream,
                                 "kind": "student"},
                    body_mass=body_mass)
                try:
                    stu_w = _cycle_waveform(
                        log_s, log_s.asarray("exo_torque")[:, 1], cfg, "Nm")
                    student_waves[cond] = stu_w
                    r, rmse = waveform_stats(exo_waves[cond], stu_w)
                    agreement_rows.append((slope, speed, r, rmse / body_mass))
                except (NoEvents, InsufficientStrides, KeyError):
                    agreement_rows.append((slope, speed, float("nan"),
                                           float("nan")))

    report = assistance_effect(assisted_metrics, baseline_metrics)
    write_effect_csv(os.path.join(run_dir, "effect_report.csv"), report)
    write_waveform_bundle(os.path.join(run_dir, "waveforms_exo.csv"), exo_waves)
    write_waveform_bundle(os.path.join(run_dir, "waveforms_bio_hip.csv"),
                          bio_waves)
    if student_waves:
        write_waveform_bundle(os.path.join(run_dir, "waveforms_student.csv"),
                              student_waves)

    with open(os.path.join(run_dir, "peaks.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["slope_deg", "speed", "extension_peak_pct",
                    "flexion_peak_pct", "extension_lag_ms", "flexion_lag_ms"])
        for row in peak_rows:
            w.writerow([repr(float(x)) for x in row])

    if agreement_rows:
        with open(os.path.join(run_dir, "student_agreement.csv"), "w",
                  newline="") as f:
            w = csv.writer(f)
            w.writerow(["slope_deg", "speed", "waveform_r", "rmse_nm_per_kg"])
            for row in agreement_rows:
                w.writerow([repr(float(x)) for x in row])

    _write_summary(run_dir, report, agreement_rows)
    return run_dir


def _write_summary(run_dir, report, agreement_rows):
    with open(os.path.join(run_dir, "summary.txt"), "w") as f:
        act = [v for v in report.activation_reduction_pct.values()
               if np.isfinite(v)]
        pwr = [v for v in report.power_reduction_pct.values()
               if np.isfinite(v)]
        f.write(f"conditions: {len(report.conditions)}\n")
        f.write(f"mean activation reduction pct: "
                f"{np.mean(act) if act else float('nan')!r}\n")
        f.write(f"mean positive-power reduction pct: "
                f"{np.mean(pwr) if pwr else float('nan')!r}\n")
        f.write(f"speed_corr_activation: {report.speed_corr_activation!r}\n")
        f.write(f"speed_corr_power: {report.speed_corr_power!r}\n")
        if agreement_rows:
            rs = [r for (_, _, r, _) in agreement_rows if np.isfinite(r)]
            f.write(f"teacher-student waveform r mean: "
                    f"{np.mean(rs) if rs else float('nan')!r}\n")
