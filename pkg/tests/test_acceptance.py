"""Acceptance gates.

One test per criterion, each printing a PASS line with the measured values
when it succeeds (run with -s or check captured output).  Criterion 7 (the
multi-hour stage-1 locomotion gate) is marked `slowgate` and deselected by
default; run it with `pytest -m slowgate tests/test_acceptance.py`.
Criteria 6, 9, and 11 take minutes and are marked `slow` but still run in
the default suite.
"""

import math
import multiprocessing as mp
import os

import numpy as np
import pytest

from myoexo.rng import substream

SEED = 20240817


def report(criterion, detail):
    print(f"ACCEPTANCE {criterion} PASS: {detail}")


# -- helpers shared across gates ------------------------------------------------

def make_locomotion_env(name, cfg_overrides=None, seed=SEED):
    from myoexo.config import (build_config, make_env_config, make_model,
                               make_muscles)
    from myoexo.locomotion_env import LocomotionEnv

    cfg = build_config(cfg_overrides or {})
    return LocomotionEnv(cfg=make_env_config(cfg), model=make_model(cfg),
                         muscles=make_muscles(cfg), rng=substream(seed, name))


@pytest.fixture(scope="module")
def scripted_student():
    """Scripted-teacher dataset + 5-epoch student, shared by gates 9 and 11."""
    from myoexo.distill import build_dataset, train_student
    from myoexo.netcore import TcnNet
    from myoexo.stage0 import scripted_rollout

    logs = []
    i = 0
    for slope in (-5.0, 0.0, 5.0):
        for speed in (0.8, 1.0, 1.2, 1.4):
            env = make_locomotion_env(f"d/{i}")
            logs.append(scripted_rollout(env, speed, slope, 16.0,
                                         substream(SEED, f"dj/{i}"),
                                         exo_source="scripted"))
            i += 1
    dataset = build_dataset(logs, substream(SEED, "distill"))
    net = TcnNet(rng=substream(SEED, "init"))
    train_losses, val_losses = train_student(
        dataset, net, substream(SEED, "train"), epochs=5, lr=2e-3)
    return dataset, net, train_losses, val_losses


# -- criterion 1: filter analytics ------------------------------------------------

def test_criterion_1_filter_analytics():
    from myoexo.exo import alpha_from, lpf_step

    alpha = alpha_from(0.005, 0.1)
    u = 0.0
    for _ in range(10):
        u = lpf_step(u, 1.0, alpha)
    err_step = abs(u - (1.0 - 0.95 ** 10))
    assert err_step < 1e-12

    n = int(20 * 0.1 / 0.005)
    v = 0.0
    for _ in range(n):
        v = lpf_step(v, 2.5, alpha)
    err_dc = abs(v - 2.5)
    assert err_dc < 1e-6
    report(1, f"unit-step error {err_step:.2e}, DC error {err_dc:.2e}")


# -- criterion 2: command-shaping contract ---------------------------------------

def test_criterion_2_command_shaping_fuzz():
    from myoexo.exo import ExoPipelineConfig, ExoPipelineState, pipeline_step

    n_streams = 1_000_000
    ticks = 20
    cfg = ExoPipelineConfig()
    state = ExoPipelineState(np.zeros(n_streams), np.zeros(n_streams))
    rng = substream(SEED, "fuzz")
    max_torque = 0.0
    max_delta = 0.0
    for _ in range(ticks):
        prev = np.array(state.u_prev_cmd, copy=True)
        raw = rng.uniform(-4.0, 4.0, n_streams)
        torque, state = pipeline_step(raw, state, cfg)
        max_torque = max(max_torque, float(np.abs(torque).max()))
        max_delta = max(max_delta,
                        float(np.abs(state.u_prev_cmd - prev).max()))
    assert max_torque <= 12.0 + 1e-9
    assert max_delta <= 0.5 + 1e-12
    report(2, f"{n_streams} streams x {ticks} ticks: max |torque| "
              f"{max_torque:.6f} Nm, max per-tick delta {max_delta:.6f}")


# -- criterion 3: mass scaling -----------------------------------------------------

def test_criterion_3_mass_scaling():
    from myoexo.exo import scale_torque

    rng = substream(SEED, "mass")
    worst = 0.0
    for _ in range(1000):
        u = float(rng.uniform(-12, 12))
        m = float(rng.uniform(40, 120))
        # direct substitution: command times the mass ratio
        worst = max(worst, abs(scale_torque(u, m) - u * (m / 74.5)))
    assert worst == 0.0
    assert scale_torque(1.0, 74.5) == 1.0
    report(3, f"1000 random pairs exact (max abs err {worst:.1e}); "
              f"identity at 74.5 kg")


# -- criterion 4: gradient engine --------------------------------------------------

def _dense_kink_margin(net, x):
    """Distance of the closest rectifier pre-activation to its kink; finite
    differences are ill-posed within h of a kink (no gradient exists there)."""
    h = np.atleast_2d(np.asarray(x, dtype=net.dtype))
    margin = np.inf
    for layer in range(net.n_layers - 1):
        z = h @ net.params[2 * layer] + net.params[2 * layer + 1]
        margin = min(margin, float(np.abs(z).min()))
        h = np.maximum(z, 0.0)
    return margin


def _actor_instance(rng):
    from myoexo.netcore import (DenseNet, gaussian_head_backward,
                                gaussian_head_sample)

    while True:
        net = DenseNet([5, 10, 8], rng=rng, dtype=np.float64)  # 4-dim head
        x = rng.normal(size=(2, 5))
        if _dense_kink_margin(net, x) > 1e-3:
            break
    eps = rng.normal(size=(2, 4))
    wa = rng.normal(size=(2, 4))
    wl = rng.normal(size=2)

    def fn():
        out, cache = net.forward(x)
        a, logp, hcache = gaussian_head_sample(out, eps)
        loss = float(np.sum(a * wa) + np.sum(logp * wl))
        grads, _ = net.backward(cache, gaussian_head_backward(hcache, wa, wl))
        return loss, grads

    return fn, net.params


def _critic_instance(rng):
    from myoexo.netcore import DenseNet

    while True:
        net = DenseNet([7, 12, 6, 1], rng=rng, dtype=np.float64)
        x = rng.normal(size=(3, 7))
        if _dense_kink_margin(net, x) > 1e-3:
            break
    w = rng.normal(size=(3, 1))

    def fn():
        out, cache = net.forward(x)
        loss = float(np.sum(out * w))
        grads, _ = net.backward(cache, w)
        return loss, grads

    return fn, net.params


def _tcn_kink_margin(net, x):
    from myoexo.netcore.tcn import _causal_conv_forward

    h = np.asarray(x, dtype=net.dtype)
    margin = np.inf
    p = 0
    for bi, blk in enumerate(net.blocks):
        conv, _ = _causal_conv_forward(h, net.params[p], net.params[p + 1],
                                       blk.dilation)
        p += 2
        margin = min(margin, float(np.abs(conv).min()))
        act = np.maximum(conv, 0.0)
        if net._skip_param[bi] is not None:
            skip = np.einsum("oi,bit->bot", net.params[p], h)
            p += 1
        else:
            skip = h
        h = act + skip
    return margin


def _tcn_instance(rng):
    from myoexo.netcore import TcnNet

    while True:
        net = TcnNet(window=12, blocks=[(3, 3, 1), (3, 3, 2)], rng=rng,
                     dtype=np.float64)
        net.params[-2][...] = rng.normal(0, 0.5, net.params[-2].shape)
        net.bump_version()
        x = rng.normal(size=(1, 1, 12))
        if _tcn_kink_margin(net, x) > 1e-3:
            break
    w = rng.normal(size=(1, 12))

    def fn():
        y, cache = net.forward_sequence(x)
        loss = float(np.sum(y * w))
        grads, _ = net.backward_sequence(cache, w)
        return loss, grads

    return fn, net.params


@pytest.mark.slow
def test_criterion_4_gradient_engine():
    from myoexo.netcore.fdcheck import gradient_max_rel_error

    worst = {"actor": 0.0, "critic": 0.0, "tcn": 0.0}
    builders = {"actor": _actor_instance, "critic": _critic_instance,
                "tcn": _tcn_instance}
    for name, builder in builders.items():
        for draw in range(100):
            rng = substream(SEED, f"grad/{name}/{draw}")
            fn, params = builder(rng)
            worst[name] = max(worst[name], gradient_max_rel_error(fn, params))
        assert worst[name] < 1e-4, f"{name}: {worst[name]:.2e}"
    report(4, "max FD relative error over 100 draws each: "
              + ", ".join(f"{k}={v:.2e}" for k, v in worst.items()))


# -- criterion 5: NMF ---------------------------------------------------------------

def test_criterion_5_nmf():
    from myoexo.synergy import (ActivationMatrix, extract_basis_from_rollouts,
                                nmf, nmf_best_of, vaf)

    # objective nonincreasing at every iteration, 50 random problems
    worst_uptick = 0.0
    for trial in range(50):
        rng = substream(SEED, f"nmf/{trial}")
        V = rng.uniform(0, 1, (int(rng.integers(4, 12)),
                               int(rng.integers(20, 120))))
        rank = int(rng.integers(1, min(V.shape)))
        _, _, obj = nmf(V, rank, max_iters=200, tol=0.0, rng=rng,
                        track_objective=True)
        diffs = np.diff(obj)
        worst_uptick = max(worst_uptick, float(diffs.max() / obj[0]))
        assert np.all(diffs <= 1e-10 * obj[0] + 1e-15)

    # exact-rank synthetic factorization
    rng = substream(SEED, "nmf/exact")
    W_true = rng.uniform(0.05, 1, (8, 3))
    H_true = rng.uniform(0.05, 1, (3, 200))
    V = W_true @ H_true
    W, H = nmf_best_of(V, 3, restarts=10, max_iters=4000, tol=1e-13,
                       seed=SEED)
    vaf_exact = vaf(V, W, H)
    assert vaf_exact >= 0.999

    # basis recovery from synthetic stride logs
    rng = substream(SEED, "nmf/logs")
    W_true = rng.uniform(0, 1, (8, 4))
    n_strides, per = 10, 110
    phase = np.linspace(0, n_strides, n_strides * per, endpoint=False) % 1.0
    H_true = np.clip(np.stack([
        0.5 + 0.5 * np.sin(2 * np.pi * (phase - k / 4)) for k in range(4)]),
        0, None)
    V = np.clip(W_true @ H_true, 0, 1)
    logs = ActivationMatrix(V, [k * per for k in range(n_strides + 1)], 40.0)
    basis = extract_basis_from_rollouts(logs, 4, restarts=6, max_iters=3000,
                                        tol=1e-12, seed=SEED)
    assert basis.vaf >= 0.99
    report(5, f"50 problems monotone (worst relative uptick "
              f"{worst_uptick:.1e}); exact-rank VAF {vaf_exact:.6f}; "
              f"log-recovery VAF {basis.vaf:.5f}")


# -- criterion 6: SAC micro-convergence ----------------------------------------------

def _toy_seed_run(seed):
    from myoexo.rng import substream as sub
    from myoexo.sac import AgentHyper, SacAgent
    from myoexo.toy_env import ToyTorqueEnv
    from myoexo.trainer import SacConfig, evaluate, latest_checkpoint, \
        load_checkpoint, train
    import tempfile

    hyper = dict(actor_hidden=(32, 32), critic_hidden=(32, 32))

    def factory(rng):
        return ToyTorqueEnv(rng=rng)

    agent0 = SacAgent(3, 1, AgentHyper(**hyper), rng=sub(seed, "agentinit"))
    init = float(np.median(evaluate(agent0, factory, 9, seed=900 + seed)))

    cfg = SacConfig(batch_size=128, replay_capacity=200_000, n_envs=1,
                    stage1_steps=200_000, stage2_steps=2, warmup_steps=500,
                    actor_hidden=(32, 32), critic_hidden=(32, 32),
                    checkpoint_every=10**9, update_every=2)
    with tempfile.TemporaryDirectory() as d:
        train(cfg, "exo", factory, d, seed=seed)
        agent = SacAgent(3, 1, AgentHyper(**hyper), rng=sub(0, "x"))
        load_checkpoint(latest_checkpoint(d), agent)
    final = float(np.median(evaluate(agent, factory, 9, seed=900 + seed)))
    return init, final


@pytest.mark.slow
def test_criterion_6_sac_micro_convergence():
    from myoexo.replay import Batch
    from myoexo.sac import AgentHyper, SacAgent

    # frozen single-transition buffer, gamma -> 0: critics memorize r
    agent = SacAgent(4, 2, AgentHyper(gamma=1e-12, actor_hidden=(16, 16),
                                      critic_hidden=(16, 16)),
                     rng=substream(SEED, "frozen"))
    obs = np.ones((1, 4), dtype=np.float32)
    batch = Batch(obs=obs, action=np.zeros((1, 2), dtype=np.float32),
                  reward=np.array([0.7], dtype=np.float32),
                  next_obs=obs.copy(), done=np.ones(1, dtype=np.float32))
    rng = substream(SEED, "frozen/upd")
    critic_loss = None
    for _ in range(4000):
        critic_loss = agent.update(batch, rng)["critic1"]
    assert critic_loss < 1e-6

    seeds = [11, 12, 13, 14, 15]
    ctx = mp.get_context("fork")
    with ctx.Pool(processes=min(5, os.cpu_count() or 1)) as pool:
        results = pool.map(_toy_seed_run, seeds)
    inits = [r[0] for r in results]
    finals = [r[1] for r in results]
    improvement = np.median(inits) / np.median(finals)  # both negative
    assert improvement >= 5.0
    report(6, f"frozen-buffer critic loss {critic_loss:.2e}; median return "
              f"{np.median(inits):.1f} -> {np.median(finals):.1f} "
              f"({improvement:.1f}x over 2e5 steps, 5 seeds)")


# -- criterion 7: stage-1 locomotion gate (multi-hour) --------------------------------

@pytest.mark.slowgate
def test_criterion_7_stage1_locomotion_gate(tmp_path):
    """Desk-profile stage-1 training must reach a median episode duration of
    5 s at 1.0 m/s level ground for at least 1 of 3 seeds.  Expect roughly
    10-14 hours per seed on one core."""
    from myoexo.config import build_config, make_env_factory, make_sac_config
    from myoexo.netcore import gaussian_head_deterministic, load_net
    from myoexo.rollout import policy_rollout
    from myoexo.stage0 import right_leg_activation_matrix, scripted_rollout
    from myoexo.synergy import extract_basis_from_rollouts
    from myoexo.trainer import latest_checkpoint, train

    cfg = build_config({"sac": {"stage2_steps": 1}})
    logs = [scripted_rollout(make_locomotion_env(f"g7/{i}"), v, 0.0, 12.0,
                             substream(SEED, f"g7/{i}/j"))
            for i, v in enumerate((0.8, 1.0, 1.2))]
    basis = extract_basis_from_rollouts(
        right_leg_activation_matrix(logs, 40.0), 4, seed=SEED)

    durations = []
    for seed in (1, 2, 3):
        out = tmp_path / f"gate7_seed{seed}"
        train(make_sac_config(cfg), "noexo",
              make_env_factory(cfg, basis=basis), str(out), seed=seed)
        actor, _ = load_net(os.path.join(latest_checkpoint(str(out)),
                                         "actor.net"))

        def action_fn(obs):
            out_, _ = actor.forward(np.asarray(obs, dtype=np.float32)[None, :])
            return gaussian_head_deterministic(out_)[0].astype(np.float64)

        eps = []
        for ep in range(9):
            env = make_locomotion_env(f"g7eval/{seed}/{ep}", seed=seed)
            log = policy_rollout(env, action_fn, 800, 0.0, 1.0, "2b")
            eps.append(log.duration_s)
        durations.append(float(np.median(eps)))
    assert max(durations) >= 5.0
    report(7, f"median episode durations at 1.0 m/s level: {durations}")


# -- criterion 8: curriculum mechanics -------------------------------------------------

def test_criterion_8_curriculum_mechanics():
    from myoexo.curriculum import (SPEED_CYCLE, CurriculumContext,
                                   next_target_speed, sample_slope,
                                   update_difficulty)

    rng = substream(SEED, "curr")
    scores = np.array([0.5, 1.0, 2.0, 1.5, 1.0, 3.0, 0.8, 1.0, 2.5, 1.0, 0.6])
    p = scores / scores.sum()
    n = 100_000
    counts = np.bincount([sample_slope(scores, rng) for _ in range(n)],
                         minlength=11)
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sigma)

    ctx = CurriculumContext()
    for _ in range(2000):
        update_difficulty(ctx, int(rng.integers(0, 11)),
                          fell=bool(rng.integers(2)))
        assert np.all(ctx.scores >= ctx.score_min)

    ctx = CurriculumContext()
    speeds = [next_target_speed(ctx) for _ in range(16)]
    assert speeds == list(SPEED_CYCLE) * 2
    assert speeds[0] == 0.7 and speeds[4] == 1.5 and speeds[8] == 0.7

    # stage-1 and no-exo (2b) episodes apply exactly zero exo torque
    from myoexo.locomotion_env import ACTION_DIM

    for stage in ("1", "2b"):
        env = make_locomotion_env(f"curr/{stage}")
        ctx = CurriculumContext(stage=stage)
        env.reset(ctx)
        arng = substream(SEED, f"curr/{stage}/a")
        for _ in range(30):
            a = arng.uniform(-1, 1, ACTION_DIM)
            _, _, done, info = env.step(a)
            assert np.all(info["exo_torque_substeps"] == 0.0)
            if done:
                env.reset(ctx)

    # every slope reachable: coupon-collector check over resets
    env = make_locomotion_env("curr/reset")
    ctx = CurriculumContext()
    seen = set()
    for _ in range(10_000):
        env.reset(ctx)
        seen.add(env.terrain.slope_deg)
        if len(seen) == 11:
            break
    assert len(seen) == 11
    report(8, f"frequencies within 3 sigma over {n} draws; floor held; "
              f"speed cycle exact; stage-1/2b exo identically zero; "
              f"all 11 slopes sampled")


# -- criterion 9: distillation ----------------------------------------------------------

@pytest.mark.slow
def test_criterion_9_distillation(scripted_student):
    from myoexo.distill import evaluate_agreement, predict

    dataset, net, train_losses, val_losses = scripted_student
    assert all(b < a for a, b in zip(train_losses, train_losses[1:])), \
        f"train losses not strictly decreasing: {train_losses}"
    preds = predict(net, dataset, dataset.val_idx)
    r2 = evaluate_agreement(dataset.labels[dataset.val_idx], preds)
    assert r2 >= 0.9
    report(9, f"held-out R^2 {r2:.4f} (gate 0.9); per-epoch train MSE "
              + " -> ".join(f"{x:.4f}" for x in train_losses))


# -- criterion 10: metric oracles ---------------------------------------------------------

def test_criterion_10_metric_oracles():
    from myoexo.gait_eval import (CYCLE_POINTS, GaitWaveform, mean_activation,
                                  mean_positive_power, normalize_cycle,
                                  peak_lag, peak_timing, waveform_stats)

    rng = substream(SEED, "metrics")
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=CYCLE_POINTS)
        y = rng.normal(size=CYCLE_POINTS)
        a, b = GaitWaveform(x), GaitWaveform(y)
        r, rmse = waveform_stats(a, b)
        n = CYCLE_POINTS
        cov = sum((u - x.mean()) * (v - y.mean()) for u, v in zip(x, y)) / n
        r_ref = cov / (x.std() * y.std())
        rmse_ref = math.sqrt(sum((u - v) ** 2 for u, v in zip(x, y)) / n)
        worst = max(worst, abs(r - r_ref), abs(rmse - rmse_ref))

        ext, flx = peak_timing(a)
        assert ext == float(min(range(n), key=lambda i: (x[i], i)))
        assert flx == float(min(range(n), key=lambda i: (-x[i], i)))

        stride = float(rng.uniform(0.8, 1.4))
        lag_ext, lag_flx = peak_lag(a, b, stride)
        ref_ext = (peak_timing(b)[0] - ext)
        ref_ext = 50.0 - ((50.0 - ref_ext) % 100.0)
        worst = max(worst, abs(lag_ext - ref_ext * stride * 10.0))

        act = rng.uniform(0, 1, (700, 18))
        got = mean_activation(act, 40.0)
        ref = act[80:680].sum() / (600 * 18)
        worst = max(worst, abs(got - ref))

        tau = rng.normal(size=(700, 6))
        om = rng.normal(size=(700, 6))
        got = mean_positive_power(tau, om, 74.5, 40.0)
        ref = np.mean([sum(max(tau[i, j] * om[i, j], 0.0) for j in range(6))
                       for i in range(80, 680)]) / 74.5
        worst = max(worst, abs(got - ref))
    assert worst < 1e-10

    # analytic sinusoid resampling
    period, strides = 110, 6
    npts = strides * period + 1
    phase = (np.arange(npts) % period) / period
    w = normalize_cycle(np.sin(2 * np.pi * phase),
                        np.arange(0, npts, period), n_cycles=5,
                        sample_rate_hz=100.0)
    template = np.sin(2 * np.pi * np.arange(CYCLE_POINTS) / 100.0)
    template[-1] = 0.0
    resample_err = float(np.max(np.abs(w.samples - template)))
    assert resample_err < 1e-3
    report(10, f"100 random inputs: max |deviation| from brute force "
               f"{worst:.2e}; sinusoid resampling error {resample_err:.2e}")


# -- criterion 11: closed-loop consistency ---------------------------------------------

@pytest.mark.slow
def test_criterion_11_closed_loop_consistency(scripted_student):
    """Gate 7 has not produced a trained teacher in this session, so this
    runs the sanctioned desk analog: the scripted oscillatory teacher of
    gate 9 versus its distilled student, matched (slope, speed, seed).
    Set MYOEXO_TEACHER_RUN to a finished training run directory to evaluate
    the real teacher/student pair instead."""
    teacher_run = os.environ.get("MYOEXO_TEACHER_RUN")
    if teacher_run:
        mean_r = _closed_loop_real_teacher(teacher_run)
        assert mean_r >= 0.8
        report(11, f"trained-teacher closed loop mean waveform r {mean_r:.3f}")
        return

    from myoexo.gait_eval import normalize_cycle, waveform_stats
    from myoexo.stage0 import scripted_rollout

    dataset, net, _, _ = scripted_student
    rs = []
    for slope in (-5.0, 0.0, 5.0):
        for speed in (0.8, 1.1, 1.4):
            name = f"cl/{slope}/{speed}"
            log_t = scripted_rollout(
                make_locomotion_env(name), speed, slope, 14.0,
                substream(SEED, name + "/j"), exo_source="scripted")
            log_s = scripted_rollout(
                make_locomotion_env(name), speed, slope, 14.0,
                substream(SEED, name + "/j"), exo_source="student",
                student=net, student_norm=(dataset.norm_mean, dataset.norm_std))
            wt = normalize_cycle(log_t.asarray("exo_torque")[:, 1],
                                 np.asarray(log_t.stride_ticks), 5)
            ws = normalize_cycle(log_s.asarray("exo_torque")[:, 1],
                                 np.asarray(log_s.stride_ticks), 5)
            r, _ = waveform_stats(wt, ws)
            rs.append(r)
    mean_r = float(np.mean(rs))
    assert mean_r >= 0.8
    report(11, f"scripted-teacher desk analog: waveform r per condition "
               f"{[f'{r:.2f}' for r in rs]}, mean {mean_r:.3f} (gate 0.8)")


def _closed_loop_real_teacher(teacher_run):
    from myoexo.cli import _load_actor_policy
    from myoexo.config import load_config, make_env_factory
    from myoexo.distill import closed_loop_student_rollout
    from myoexo.gait_eval import (InsufficientStrides, NoEvents,
                                  detect_gait_events, normalize_cycle,
                                  waveform_stats)
    from myoexo.netcore import load_net
    from myoexo.rollout import policy_rollout
    from myoexo.synergy import load_basis_csv

    cfg = load_config(os.path.join(teacher_run, "config.yaml"))
    basis = load_basis_csv(os.path.join(teacher_run, "basis.csv"))
    action_fn, _ = _load_actor_policy(teacher_run)
    student_path = os.environ.get(
        "MYOEXO_STUDENT", os.path.join(teacher_run, "..", "distill",
                                       "student.net"))
    student, meta = load_net(student_path)
    extra = meta.get("extra", {})
    factory = make_env_factory(cfg, basis=basis)
    rs = []
    for slope in (-5.0, 0.0, 5.0):
        for speed in (0.7, 0.9, 1.1, 1.3, 1.5):
            stream = f"eval/{slope:+g}/{speed:g}"
            env = factory(substream(cfg.seed, stream))
            log_t = policy_rollout(env, action_fn, 800, slope, speed, "2a")
            env = factory(substream(cfg.seed, stream))
            log_s = closed_loop_student_rollout(
                student, env, action_fn, slope, speed, 20.0,
                extra.get("norm_mean", 0.0), extra.get("norm_std", 1.0))
            try:
                ev_t = detect_gait_events(log_t.asarray("grf")[:, 2], 50.0, 40.0)
                ev_s = detect_gait_events(log_s.asarray("grf")[:, 2], 50.0, 40.0)
                wt = normalize_cycle(log_t.asarray("exo_torque")[:, 1], ev_t, 5)
                ws = normalize_cycle(log_s.asarray("exo_torque")[:, 1], ev_s, 5)
                r, _ = waveform_stats(wt, ws)
                if np.isfinite(r):
                    rs.append(r)
            except (NoEvents, InsufficientStrides):
                continue
    return float(np.mean(rs)) if rs else float("nan")


# -- criterion 12: reproducibility ----------------------------------------------------

def test_criterion_12_reproducibility(tmp_path):
    import yaml

    from myoexo.cli import main

    cfg = {
        "stage0": {"duration_s": 8.0, "speeds": [1.0]},
        "sac": {"stage1_steps": 300, "stage2_steps": 300, "n_envs": 2,
                "batch_size": 32, "replay_capacity": 4000,
                "warmup_steps": 100, "actor_hidden": [16, 16],
                "critic_hidden": [16, 16], "checkpoint_every": 300},
    }
    cfgp = tmp_path / "cfg.yaml"
    cfgp.write_text(yaml.safe_dump(cfg))
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["synergy", "--config", str(cfgp), "--out", str(out),
                     "--seed", "5", "--workers", "1"]) == 0
        assert main(["train", "--config", str(cfgp), "--out", str(out),
                     "--seed", "5", "--workers", "1",
                     "--condition", "exo"]) == 0
        outs.append(out)
    a, b = outs
    pairs = [
        ("synergy/basis.csv",) * 2,
        ("train_exo/metrics.csv",) * 2,
        ("train_exo/ckpt_final/actor.net",) * 2,
        ("train_exo/ckpt_final/critic1.net",) * 2,
        ("train_exo/ckpt_final/alpha.net",) * 2,
    ]
    for pa, pb in pairs:
        ba = (a / pa).read_bytes()
        bb = (b / pb).read_bytes()
        assert ba == bb, f"{pa} differs between identical runs"
    report(12, "synergy + train re-runs byte-identical "
               "(basis, metrics CSV, checkpoints)")
