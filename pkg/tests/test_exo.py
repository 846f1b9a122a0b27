import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from myoexo.exo import (
    ExoPipelineConfig,
    ExoPipelineState,
    InvalidTimeConstant,
    alpha_from,
    lpf_step,
    pipeline_step,
    rate_limit,
    scale_torque,
    shape_command,
)


def test_alpha_simulation_rates():
    assert alpha_from(0.005, 0.1) == pytest.approx(0.05, abs=1e-15)


def test_alpha_passthrough():
    assert alpha_from(0.1, 0.1) == 1.0


def test_alpha_hardware_rates():
    assert alpha_from(0.01, 0.15) == pytest.approx(1.0 / 15.0, abs=1e-15)


@pytest.mark.parametrize("dt,tau", [(0.2, 0.1), (0.0, 0.1), (-0.01, 0.1), (0.01, -1.0)])
def test_alpha_rejects_bad_constants(dt, tau):
    with pytest.raises(InvalidTimeConstant):
        alpha_from(dt, tau)


def test_lpf_single_step():
    assert lpf_step(0.0, 1.0, 0.05) == pytest.approx(0.05, abs=1e-15)


def test_lpf_fixed_point():
    assert lpf_step(0.7, 0.7, 0.05) == 0.7


def test_lpf_unit_step_closed_form():
    # independent oracle: u_k = 1 - (1 - alpha)^k for a unit step from zero
    alpha = 0.05
    u = 0.0
    for k in range(1, 11):
        u = lpf_step(u, 1.0, alpha)
        assert u == pytest.approx(1.0 - (1.0 - alpha) ** k, abs=1e-12)
    assert u == pytest.approx(1.0 - 0.95**10, abs=1e-12)


def test_lpf_dc_gain():
    cfg = ExoPipelineConfig()
    n = int(20 * cfg.tau_lpf / cfg.dt)
    u = 0.0
    for _ in range(n):
        u = lpf_step(u, 3.0, cfg.alpha)
    assert abs(u - 3.0) < 1e-6


def test_rate_limit_clips_up():
    assert rate_limit(2.0, 1.0, 0.5) == 1.5


def test_rate_limit_within_band():
    assert rate_limit(1.1, 1.0, 0.5) == 1.1


def test_rate_limit_clips_down():
    assert rate_limit(-2.0, 0.0, 0.5) == -0.5


def test_scale_torque_identity_at_reference():
    assert scale_torque(1.0, 74.5) == 1.0


def test_scale_torque_linearity():
    assert scale_torque(1.0, 37.25) == pytest.approx(0.5)


def test_scale_torque_direct_substitution():
    assert scale_torque(-6.0, 74.5 * 1.2) == pytest.approx(-7.2, abs=1e-12)


@given(st.floats(-20, 20), st.floats(1, 200))
def test_scale_torque_matches_formula(u, m):
    assert scale_torque(u, m) == pytest.approx(u * m / 74.5, rel=1e-12, abs=1e-12)


def test_pipeline_zero_in_zero_out():
    cfg = ExoPipelineConfig()
    state = ExoPipelineState()
    for _ in range(50):
        torque, state = pipeline_step(0.0, state, cfg)
        assert torque == 0.0


def test_pipeline_step_saturation_and_monotone_rise():
    cfg = ExoPipelineConfig()
    state = ExoPipelineState()
    prev = 0.0
    for _ in range(2000):
        torque, state = pipeline_step(1.0, state, cfg)
        assert torque >= prev - 1e-12
        assert torque <= cfg.t_max + 1e-12
        prev = torque
    assert prev == pytest.approx(cfg.t_max, abs=1e-3)


def test_pipeline_alternating_commands_rate_limited():
    # oracle: apply the clip rule by hand tick by tick
    cfg = ExoPipelineConfig()
    state = ExoPipelineState()
    expected_prev = 0.0
    for k in range(40):
        raw = 1.0 if k % 2 == 0 else -1.0
        pipeline_step(raw, state, cfg)
        expected = np.clip(raw, expected_prev - 0.5, expected_prev + 0.5)
        assert state.u_prev_cmd == pytest.approx(expected, abs=1e-15)
        if k > 0:
            assert abs(state.u_prev_cmd - expected_prev) == pytest.approx(0.5, abs=1e-15)
        expected_prev = expected


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-4, 4), min_size=1, max_size=60), st.integers(0, 2**31 - 1))
def test_pipeline_invariants_fuzz(raws, seed):
    rng = np.random.default_rng(seed)
    cfg = ExoPipelineConfig(subject_mass=float(rng.uniform(40, 110)))
    state = ExoPipelineState()
    prev_cmd = 0.0
    lo, hi = 0.0, 0.0
    for raw in raws:
        torque, state = pipeline_step(raw, state, cfg)
        assert abs(torque) <= cfg.t_max + 1e-12
        assert abs(state.u_prev_cmd - prev_cmd) <= cfg.rate_limit_c + 1e-12
        prev_cmd = float(state.u_prev_cmd)
        # filter output stays within the running envelope of its Nm inputs
        u_nm = prev_cmd * cfg.t_max * cfg.subject_mass / cfg.reference_mass
        lo, hi = min(lo, u_nm), max(hi, u_nm)
        assert min(lo, -cfg.t_max) - 1e-9 <= torque <= max(hi, cfg.t_max) + 1e-9


def test_pipeline_vectorized_streams():
    cfg = ExoPipelineConfig()
    n = 1000
    state = ExoPipelineState(np.zeros(n), np.zeros(n))
    rng = np.random.default_rng(0)
    for _ in range(30):
        torque, state = pipeline_step(rng.uniform(-3, 3, n), state, cfg)
        assert np.all(np.abs(torque) <= cfg.t_max + 1e-12)


def test_shape_command_mass_scaling_order():
    # at half the reference mass a full-scale command maps to half t_max
    cfg = ExoPipelineConfig(subject_mass=74.5 / 2)
    state = ExoPipelineState()
    state.u_prev_cmd = 1.0
    u = shape_command(1.0, state, cfg)
    assert u == pytest.approx(cfg.t_max / 2)


def test_state_invariant_filtered_within_peak():
    cfg = ExoPipelineConfig()
    state = ExoPipelineState()
    rng = np.random.default_rng(7)
    for _ in range(500):
        pipeline_step(float(rng.uniform(-1, 1)), state, cfg)
        assert abs(state.u_prev_filtered) <= cfg.t_max
