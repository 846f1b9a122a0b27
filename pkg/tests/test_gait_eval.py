import numpy as np
import pytest

from myoexo.gait_eval import (
    CYCLE_POINTS,
    GaitWaveform,
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


def wf(samples, **kw):
    return GaitWaveform(np.asarray(samples, dtype=float), **kw)


# -- event detection ----------------------------------------------------------

def test_square_wave_events():
    rate = 100.0
    period = 110  # 1.1 s
    n = 8 * period
    grf = np.where((np.arange(n) % period) < 60, 800.0, 0.0)
    events = detect_gait_events(grf, 50.0, rate)
    assert np.all(np.diff(events) == period)


def test_no_events_all_zero():
    with pytest.raises(NoEvents):
        detect_gait_events(np.zeros(1000), 50.0, 100.0)


def test_no_events_threshold_above_max():
    grf = 100.0 * np.abs(np.sin(np.linspace(0, 20, 2000)))
    with pytest.raises(NoEvents):
        detect_gait_events(grf, 500.0, 100.0)


def test_refractory_suppresses_chatter():
    rate = 100.0
    grf = np.zeros(500)
    grf[100:110] = 800.0
    grf[115:160] = 800.0  # bounce 0.05 s after the strike: suppressed
    grf[300:360] = 800.0
    events = detect_gait_events(grf, 50.0, rate)
    assert list(events) == [100, 300]


# -- cycle normalization --------------------------------------------------------

def test_constant_signal_constant_waveform():
    signal = np.full(1000, 3.5)
    events = np.arange(0, 1000, 110)
    w = normalize_cycle(signal, events, n_cycles=5)
    assert np.all(w.samples == 3.5)


def test_sinusoid_resampling_analytic():
    rate = 100.0
    period = 110
    n_strides = 6
    n = n_strides * period + 1
    phase = (np.arange(n) % period) / period
    signal = np.sin(2 * np.pi * phase)
    events = np.arange(0, n, period)
    w = normalize_cycle(signal, events, n_cycles=5, sample_rate_hz=rate)
    expected = np.sin(2 * np.pi * np.arange(CYCLE_POINTS) / 100.0)
    # endpoint of the analytic template: phase 1.0 wraps to 0
    expected[-1] = np.sin(2 * np.pi * 0.0)
    assert np.max(np.abs(w.samples - expected)) < 1e-3
    assert w.stride_duration == pytest.approx(1.1)


def test_insufficient_strides():
    with pytest.raises(InsufficientStrides):
        normalize_cycle(np.zeros(500), np.arange(0, 500, 100), n_cycles=5)


# -- waveform stats -------------------------------------------------------------

def test_identical_waveforms():
    a = wf(np.sin(np.linspace(0, 2 * np.pi, CYCLE_POINTS)))
    r, rmse = waveform_stats(a, a)
    assert r == pytest.approx(1.0)
    assert rmse == 0.0


def test_affine_invariance_of_r():
    x = np.sin(np.linspace(0, 2 * np.pi, CYCLE_POINTS))
    a, b = wf(x), wf(2 * x + 3)
    r, rmse = waveform_stats(a, b)
    assert r == pytest.approx(1.0)
    assert rmse > 0


def test_stats_match_bruteforce():
    rng = np.random.default_rng(0)
    x = rng.normal(size=CYCLE_POINTS)
    y = rng.normal(size=CYCLE_POINTS)
    r, rmse = waveform_stats(wf(x), wf(y))
    n = CYCLE_POINTS
    cov = sum((a - x.mean()) * (b - y.mean()) for a, b in zip(x, y)) / n
    r_ref = cov / (x.std() * y.std())
    rmse_ref = np.sqrt(sum((a - b) ** 2 for a, b in zip(x, y)) / n)
    assert r == pytest.approx(r_ref, abs=1e-12)
    assert rmse == pytest.approx(rmse_ref, abs=1e-12)


def test_zero_variance_reports_nan_r():
    r, rmse = waveform_stats(wf(np.ones(CYCLE_POINTS)), wf(np.zeros(CYCLE_POINTS)))
    assert np.isnan(r)
    assert rmse == 1.0


def test_rmse_translation_equivariance():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=CYCLE_POINTS), rng.normal(size=CYCLE_POINTS)
    _, r1 = waveform_stats(wf(x), wf(y))
    _, r2 = waveform_stats(wf(x + 5), wf(y + 5))
    assert r1 == pytest.approx(r2, abs=1e-12)


# -- peak timing ----------------------------------------------------------------

def test_peak_timing_sinusoid():
    k = np.arange(CYCLE_POINTS)
    w = wf(np.sin(2 * np.pi * k / 100.0))
    ext, flx = peak_timing(w)
    assert flx == 25.0
    assert ext == 75.0


def test_peak_timing_constant_tie_break():
    ext, flx = peak_timing(wf(np.ones(CYCLE_POINTS)))
    assert ext == 0.0 and flx == 0.0


def test_peak_timing_affine_invariant():
    rng = np.random.default_rng(2)
    x = rng.normal(size=CYCLE_POINTS)
    assert peak_timing(wf(x)) == peak_timing(wf(3.0 * x + 10.0))


def test_peak_lag_identical_zero():
    x = wf(np.sin(2 * np.pi * np.arange(CYCLE_POINTS) / 100.0))
    assert peak_lag(x, x, 1.1) == (0.0, 0.0)


def test_peak_lag_constructed_shift():
    k = np.arange(CYCLE_POINTS)
    bio = wf(np.sin(2 * np.pi * k / 100.0))
    exo = wf(np.sin(2 * np.pi * (k - 10) / 100.0))  # peaks 10% later
    ext_ms, flx_ms = peak_lag(bio, exo, 1.1)
    assert ext_ms == pytest.approx(110.0)
    assert flx_ms == pytest.approx(110.0)


def test_peak_lag_wraps_circularly():
    bio = np.zeros(CYCLE_POINTS)
    bio[95] = -1.0
    bio[40] = 1.0
    exo = np.zeros(CYCLE_POINTS)
    exo[3] = -1.0
    exo[40] = 1.0
    ext_ms, _ = peak_lag(wf(bio), wf(exo), 1.0)
    assert ext_ms == pytest.approx(80.0)  # +8%, not -92%


# -- rollout metrics ------------------------------------------------------------

def test_mean_activation_constant():
    act = np.full((int(17 * 40), 18), 0.5)
    assert mean_activation(act, 40.0) == pytest.approx(0.5)


def test_mean_activation_window_arithmetic():
    rate = 40.0
    n = int(17 * rate)
    act = np.zeros((n, 3))
    act[int(2 * rate):, :] = 1.0  # discard region is zero
    assert mean_activation(act, rate) == pytest.approx(1.0)


def test_mean_activation_matches_bruteforce():
    rng = np.random.default_rng(3)
    act = rng.uniform(0, 1, (700, 18))
    got = mean_activation(act, 40.0)
    start, n = 80, 600
    ref = act[start:start + n].sum() / (n * 18)
    assert got == pytest.approx(ref, abs=1e-12)


def test_mean_activation_too_short():
    with pytest.raises(RolloutTooShort):
        mean_activation(np.zeros((100, 18)), 40.0)


def test_positive_power_static():
    tau = np.ones((700, 6)) * 10.0
    omega = np.zeros((700, 6))
    assert mean_positive_power(tau, omega, 74.5, 40.0) == 0.0


def test_positive_power_excludes_negative():
    n = 700
    tau = np.full((n, 1), 10.0)
    omega = np.full((n, 1), -1.0)
    assert mean_positive_power(tau, omega, 74.5, 40.0) == 0.0


def test_positive_power_quadrature_oracle():
    rate = 40.0
    n = int(17 * rate)
    t = np.arange(n) / rate
    tau = np.stack([10 * np.sin(2 * np.pi * t), 5 * np.cos(2 * np.pi * t)], axis=1)
    omega = np.stack([np.cos(2 * np.pi * t), np.ones(n)], axis=1)
    got = mean_positive_power(tau, omega, 74.5, rate)
    start, cnt = int(2 * rate), int(15 * rate)
    ref = np.mean([max(tau[i, 0] * omega[i, 0], 0) + max(tau[i, 1] * omega[i, 1], 0)
                   for i in range(start, start + cnt)]) / 74.5
    assert got == pytest.approx(ref, abs=1e-12)


# -- assistance effects -----------------------------------------------------------

def _metrics(act, power):
    return {"mean_activation": act, "mean_positive_power": power}


def test_effect_identical_runs_zero_reduction():
    grid = {(0, 1.0): _metrics(0.1, 1.0), (5, 1.2): _metrics(0.2, 1.5)}
    report = assistance_effect(grid, dict(grid))
    assert all(v == 0.0 for v in report.activation_reduction_pct.values())
    assert np.isnan(report.speed_corr_activation) or \
        report.speed_corr_activation == 0.0


def test_effect_ten_percent_reduction():
    assisted = {(0, 1.0): _metrics(0.9, 0.9)}
    baseline = {(0, 1.0): _metrics(1.0, 1.0)}
    report = assistance_effect(assisted, baseline)
    assert report.activation_reduction_pct[(0, 1.0)] == pytest.approx(10.0)
    assert report.power_reduction_pct[(0, 1.0)] == pytest.approx(10.0)


def test_effect_linear_speed_correlation():
    speeds = [0.7, 0.9, 1.1, 1.3, 1.5]
    assisted = {(0, v): _metrics(1.0 - 0.05 * v, 1.0 - 0.1 * v) for v in speeds}
    baseline = {(0, v): _metrics(1.0, 1.0) for v in speeds}
    report = assistance_effect(assisted, baseline)
    assert report.speed_corr_activation == pytest.approx(1.0)
    assert report.speed_corr_power == pytest.approx(1.0)


def test_effect_grid_mismatch():
    with pytest.raises(GridMismatch):
        assistance_effect({(0, 1.0): _metrics(1, 1)},
                          {(5, 1.0): _metrics(1, 1)})


def test_report_csv_and_bundle(tmp_path):
    assisted = {(0, 1.0): _metrics(0.9, 0.9), (5, 1.2): _metrics(0.8, 0.7)}
    baseline = {(0, 1.0): _metrics(1.0, 1.0), (5, 1.2): _metrics(1.0, 1.0)}
    report = assistance_effect(assisted, baseline)
    write_effect_csv(tmp_path / "effect.csv", report)
    text = (tmp_path / "effect.csv").read_text()
    assert "activation_reduction_pct" in text.splitlines()[0]
    waves = {(0, 1.0): wf(np.sin(np.linspace(0, 6.28, CYCLE_POINTS)))}
    write_waveform_bundle(tmp_path / "waves.csv", waves)
    lines = (tmp_path / "waves.csv").read_text().splitlines()
    assert len(lines) == CYCLE_POINTS + 1
    assert lines[0] == "cycle_pct,slope+0_speed1,mean"
