import numpy as np
import pytest
import yaml

from myoexo.config import (
    ConfigError,
    build_config,
    config_to_dict,
    load_config,
    make_env_factory,
    make_sac_config,
    make_student_net,
    save_config,
)


def test_desk_defaults():
    cfg = build_config({})
    assert cfg.profile == "desk"
    assert cfg.sac.stage1_steps == 2_000_000
    assert cfg.sac.batch_size == 256
    assert cfg.exo.t_max == 12.0
    assert cfg.exo.tau_lpf == 0.1


def test_paper_profile_matches_published_scale():
    cfg = build_config({}, profile="paper")
    assert cfg.sac.batch_size == 512
    assert cfg.sac.replay_capacity == 3_000_000
    assert cfg.sac.n_envs == 30
    assert cfg.sac.stage1_steps == 50_000_000
    assert cfg.sac.stage2_steps == 50_000_000
    assert cfg.sac.actor_hidden == (512, 512, 256)
    assert cfg.sac.gamma == 0.99
    assert cfg.sac.tau_target == 0.005
    assert cfg.sac.init_temperature == 0.1
    assert cfg.sac.lr_stage1 == pytest.approx(1e-3)
    assert cfg.sac.lr_stage2 == pytest.approx(5e-4)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="sac.learning_rate"):
        build_config({"sac": {"learning_rate": 1e-4}})
    with pytest.raises(ConfigError, match="unknown config key: typo"):
        build_config({"typo": 1})


def test_unknown_profile_rejected():
    with pytest.raises(ConfigError):
        build_config({"profile": "huge"})


def test_overrides_applied():
    cfg = build_config({"sac": {"batch_size": 64}, "seed": 9,
                        "reward": {"w_eff": 0.5}})
    assert cfg.sac.batch_size == 64
    assert cfg.seed == 9
    assert cfg.reward.w_eff == 0.5


def test_type_checking():
    with pytest.raises(ConfigError):
        build_config({"sac": {"batch_size": 64.5}})
    with pytest.raises(ConfigError):
        build_config({"body": {"device_attached": "yes"}})


def test_roundtrip_identical(tmp_path):
    cfg = build_config({"seed": 3, "sac": {"batch_size": 128},
                        "eval": {"speeds": [0.8, 1.2]}})
    p = tmp_path / "cfg.yaml"
    save_config(p, cfg)
    cfg2 = load_config(p)
    assert config_to_dict(cfg) == config_to_dict(cfg2)
    # second round trip is byte-identical
    p2 = tmp_path / "cfg2.yaml"
    save_config(p2, cfg2)
    assert p.read_bytes() == p2.read_bytes()


def test_env_factory_toy():
    cfg = build_config({"env": {"kind": "toy"}})
    env = make_env_factory(cfg)(np.random.default_rng(0))
    assert env.obs_dim == 3


def test_env_factory_locomotion_applies_config():
    from myoexo.synergy import SynergyBasis

    rng = np.random.default_rng(0)
    w = rng.uniform(0.1, 1, (8, 4))
    w /= w.max(axis=0)
    cfg = build_config({"physics": {"contact_stiffness": 12345.0},
                        "reward": {"w_eff": 0.33},
                        "exo": {"t_max": 9.0}})
    env = make_env_factory(cfg, basis=SynergyBasis(w, vaf=1.0))(rng)
    assert env.model.contact.stiffness == 12345.0
    assert env.cfg.weights.w_eff == 0.33
    assert env.exo_cfg.t_max == 9.0


def test_student_net_from_config():
    cfg = build_config({"distill": {"tcn_channels": 8, "tcn_kernel": 5,
                                    "tcn_dilations": [1, 2]}})
    net = make_student_net(cfg)
    assert net.receptive_field == 1 + 4 * 3
    assert net.blocks[0].channels == 8


def test_sac_config_builder():
    cfg = build_config({"sac": {"stage1_steps": 100, "stage2_steps": 50}})
    sc = make_sac_config(cfg)
    assert sc.total_steps == 150
