"""Run configuration: one structured document carrying every constant of
every module, with strict unknown-key rejection, desk/paper profiles, and a
lossless YAML round trip.

The "paper" profile keeps the published training scale (50M-step stages,
batch 512, replay 3e6, 30 environments, [512,512,256] networks); "desk"
shrinks budgets to hours-scale runs while leaving the physics untouched.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass

import yaml

from .exo import ExoPipelineConfig
from .locomotion_env import EnvConfig
from .muscles import MuscleCurves
from .reward import RewardWeights
from .stage0 import HarnessConfig, Stage0Config
from .trainer import SacConfig


class ConfigError(ValueError):
    pass


@dataclass
class PhysicsSection:
    gravity: float = 9.81
    contact_stiffness: float = 30000.0
    contact_damping: float = 1000.0
    friction_mu: float = 0.9
    tangent_stiffness: float = 20000.0
    tangent_damping: float = 400.0
    limit_stiffness: float = 200.0
    limit_damping: float = 2.0


@dataclass
class BodySection:
    device_attached: bool = True
    muscle_v_max: float = 12.0
    trunk_actuator_torque: float = 100.0


@dataclass
class EnvSection:
    kind: str = "locomotion"            # locomotion | toy
    control_hz: float = 40.0
    physics_hz: float = 200.0
    horizon_s: float = 20.0
    fall_fraction: float = 0.6
    init_joint_jitter: float = 0.05
    init_speed_scale: float = 0.5
    init_swing_hip: float = 0.15
    joint_vel_scale: float = 0.1


@dataclass
class ExoSection:
    tau_lpf: float = 0.1
    t_max: float = 12.0
    rate_limit_c: float = 0.5
    subject_mass: float = 74.5
    reference_mass: float = 74.5


@dataclass
class RewardSection:
    w_vel: float = 1.0
    w_eff: float = 0.2
    w_rom: float = 0.1
    w_sm: float = 0.05
    w_fall: float = 100.0
    w_knee: float = 0.1
    flat_halfwidth: float = 0.05
    sigma_forward: float = 0.3
    sigma_normal: float = 0.3
    sigma_pitch_deg: float = 15.0
    sigma_pitch_rate_deg: float = 60.0
    lumbar_lo_deg: float = -30.0
    lumbar_hi_deg: float = 2.5
    knee_load_limit_bw: float = 3.0


@dataclass
class CurriculumSection:
    score_min: float = 0.5
    delta_up: float = 1.0
    delta_down: float = 0.2


@dataclass
class SynergySection:
    rank: int = 4
    restarts: int = 10
    max_iters: int = 2000
    tol: float = 1e-6


@dataclass
class Stage0Section:
    duration_s: float = 12.0
    speeds: tuple = (0.8, 1.0, 1.2)
    slope_deg: float = 0.0
    amplitude: float = 0.45
    jitter: float = 0.03
    harness_vertical_stiffness: float = 3000.0
    harness_vertical_damping: float = 400.0
    harness_pitch_stiffness: float = 600.0
    harness_pitch_damping: float = 60.0
    harness_tow_gain: float = 250.0


@dataclass
class SacSection:
    gamma: float = 0.99
    tau_target: float = 0.005
    batch_size: int = 256
    replay_capacity: int = 1_000_000
    init_temperature: float = 0.1
    n_envs: int = 8
    stage1_steps: int = 2_000_000
    stage2_steps: int = 2_000_000
    lr_stage1: float = 1e-3
    lr_stage2: float = 5e-4
    update_every: int = 1
    warmup_steps: int = 2000
    actor_hidden: tuple = (128, 128, 64)
    critic_hidden: tuple = (128, 128, 64)
    checkpoint_every: int = 500_000
    nonfinite_budget: int = 50


@dataclass
class DistillSection:
    epochs: int = 5
    lr: float = 2e-3
    batch_size: int = 128
    val_fraction: float = 0.2
    duration_s: float = 20.0
    slopes: tuple = (-5.0, 0.0, 5.0)
    speeds: tuple = (0.7, 0.9, 1.1, 1.3, 1.5)
    max_fall_rate: float = 0.2
    tcn_channels: int = 16
    tcn_kernel: int = 7
    tcn_dilations: tuple = (1, 2, 4, 8)


@dataclass
class EvalSection:
    slopes: tuple = (-5.0, 0.0, 5.0)
    speeds: tuple = (0.7, 0.9, 1.1, 1.3, 1.5)
    window_s: float = 15.0
    discard_s: float = 2.0
    grf_threshold_n: float = 50.0
    refractory_s: float = 0.3
    n_cycles: int = 5
    rollout_s: float = 20.0


@dataclass
class RunConfig:
    profile: str = "desk"
    seed: int = 0
    out_dir: str = "runs"
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    body: BodySection = field(default_factory=BodySection)
    env: EnvSection = field(default_factory=EnvSection)
    exo: ExoSection = field(default_factory=ExoSection)
    reward: RewardSection = field(default_factory=RewardSection)
    curriculum: CurriculumSection = field(default_factory=CurriculumSection)
    synergy: SynergySection = field(default_factory=SynergySection)
    stage0: Stage0Section = field(default_factory=Stage0Section)
    sac: SacSection = field(default_factory=SacSection)
    distill: DistillSection = field(default_factory=DistillSection)
    eval: EvalSection = field(default_factory=EvalSection)


PAPER_OVERRIDES = {
    "sac": {
        "batch_size": 512,
        "replay_capacity": 3_000_000,
        "n_envs": 30,
        "stage1_steps": 50_000_000,
        "stage2_steps": 50_000_000,
        "actor_hidden": (512, 512, 256),
        "critic_hidden": (512, 512, 256),
        "checkpoint_every": 5_000_000,
    },
}


def _coerce(value, template):
    if isinstance(template, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected boolean, got {value!r}")
        return value
    if isinstance(template, int) and not isinstance(template, bool):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"expected integer, got {value!r}")
        return int(value)
    if isinstance(template, float):
        return float(value)
    if isinstance(template, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected list, got {value!r}")
        return tuple(value)
    if isinstance(template, str):
        return str(value)
    return value


def _apply(section, data: dict, path: str):
    names = {f.name for f in fields(section)}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown config key: {path}{key}")
        current = getattr(section, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}{key} must be a mapping")
            _apply(current, value, f"{path}{key}.")
        else:
            try:
                setattr(section, key, _coerce(value, current))
            except ConfigError as e:
                raise ConfigError(f"{path}{key}: {e}") from None
    return section


def build_config(data: dict | None = None, profile: str | None = None) -> RunConfig:
    """Resolve profile defaults and overlay explicit settings (strict keys)."""
    cfg = RunConfig()
    data = copy.deepcopy(data or {})
    prof = profile or data.get("profile", "desk")
    if prof not in ("desk", "paper"):
        raise ConfigError(f"unknown profile: {prof!r}")
    cfg.profile = prof
    if prof == "paper":
        _apply_overrides(cfg, PAPER_OVERRIDES)
    if data:
        data.pop("profile", None)
        _apply(cfg, data, "")
    return cfg


def _apply_overrides(cfg, overrides):
    for section_name, section_data in overrides.items():
        section = getattr(cfg, section_name)
        for k, v in section_data.items():
            setattr(section, k, v)


def load_config(path, profile: str | None = None) -> RunConfig:
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return build_config(data, profile=profile)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: RunConfig) -> dict:
    raw = asdict(cfg)

    def walk(node):
        if isinstance(node, dict):
            return {k: walk(v) for k, v in node.items()}
        return _plain(node)

    return walk(raw)


def save_config(path, cfg: RunConfig) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=True,
                       default_flow_style=False)


# -- builders binding config sections to module objects -----------------------

def make_model(cfg: RunConfig):
    from .body import ContactParams, standard_biped

    contact = ContactParams(
        stiffness=cfg.physics.contact_stiffness,
        damping=cfg.physics.contact_damping,
        friction_mu=cfg.physics.friction_mu,
        tangent_stiffness=cfg.physics.tangent_stiffness,
        tangent_damping=cfg.physics.tangent_damping,
    )
    model = standard_biped(device_attached=cfg.body.device_attached,
                           contact=contact)
    model.gravity = cfg.physics.gravity
    model.limit_stiffness = cfg.physics.limit_stiffness
    model.limit_damping = cfg.physics.limit_damping
    return model


def make_muscles(cfg: RunConfig):
    from .muscles import MuscleSet, standard_muscles

    mset = MuscleSet(standard_muscles(v_max=cfg.body.muscle_v_max))
    mset.trunk_torque = cfg.body.trunk_actuator_torque
    return mset


def make_reward_weights(cfg: RunConfig) -> RewardWeights:
    r = cfg.reward
    return RewardWeights(
        w_vel=r.w_vel, w_eff=r.w_eff, w_rom=r.w_rom, w_sm=r.w_sm,
        w_fall=r.w_fall, w_knee=r.w_knee,
        flat_halfwidth=r.flat_halfwidth,
        sigma_forward=r.sigma_forward, sigma_normal=r.sigma_normal,
        sigma_pitch=math.radians(r.sigma_pitch_deg),
        sigma_pitch_rate=math.radians(r.sigma_pitch_rate_deg),
        lumbar_lo=math.radians(r.lumbar_lo_deg),
        lumbar_hi=math.radians(r.lumbar_hi_deg),
        knee_load_limit_bw=r.knee_load_limit_bw,
    )


def make_env_config(cfg: RunConfig) -> EnvConfig:
    e = cfg.env
    return EnvConfig(
        control_hz=e.control_hz, physics_hz=e.physics_hz,
        horizon_s=e.horizon_s, fall_fraction=e.fall_fraction,
        init_joint_jitter=e.init_joint_jitter,
        init_speed_scale=e.init_speed_scale,
        init_swing_hip=e.init_swing_hip,
        joint_vel_scale=e.joint_vel_scale,
        exo=ExoPipelineConfig(
            tau_lpf=cfg.exo.tau_lpf, dt=1.0 / e.physics_hz,
            t_max=cfg.exo.t_max, rate_limit_c=cfg.exo.rate_limit_c,
            subject_mass=cfg.exo.subject_mass,
            reference_mass=cfg.exo.reference_mass),
        weights=make_reward_weights(cfg),
    )


def make_env_factory(cfg: RunConfig, basis=None):
    """Factory building fully configured environment instances."""
    if cfg.env.kind == "toy":
        from .toy_env import ToyTorqueEnv

        return lambda rng: ToyTorqueEnv(rng=rng)

    from .locomotion_env import LocomotionEnv

    env_cfg = make_env_config(cfg)

    def factory(rng):
        return LocomotionEnv(cfg=env_cfg, model=make_model(cfg),
                             muscles=make_muscles(cfg), basis=basis, rng=rng)

    return factory


def make_sac_config(cfg: RunConfig) -> SacConfig:
    s = cfg.sac
    return SacConfig(
        gamma=s.gamma, tau_target=s.tau_target, batch_size=s.batch_size,
        replay_capacity=s.replay_capacity, init_temperature=s.init_temperature,
        n_envs=s.n_envs, stage1_steps=s.stage1_steps,
        stage2_steps=s.stage2_steps, lr_stage1=s.lr_stage1,
        lr_stage2=s.lr_stage2, update_every=s.update_every,
        warmup_steps=s.warmup_steps, actor_hidden=tuple(s.actor_hidden),
        critic_hidden=tuple(s.critic_hidden),
        checkpoint_every=s.checkpoint_every,
        nonfinite_budget=s.nonfinite_budget,
    )


def make_student_net(cfg: RunConfig, rng=None):
    from .netcore import TcnNet

    d = cfg.distill
    blocks = [(d.tcn_channels, d.tcn_kernel, dil) for dil in d.tcn_dilations]
    return TcnNet(window=95, blocks=blocks, rng=rng)


def make_stage0_config(cfg: RunConfig) -> Stage0Config:
    s = cfg.stage0
    harness = HarnessConfig(
        vertical_stiffness=s.harness_vertical_stiffness,
        vertical_damping=s.harness_vertical_damping,
        pitch_stiffness=s.harness_pitch_stiffness,
        pitch_damping=s.harness_pitch_damping,
        tow_gain=s.harness_tow_gain,
    )
    return Stage0Config(duration_s=s.duration_s, speeds=tuple(s.speeds),
                        slope_deg=s.slope_deg, amplitude=s.amplitude,
                        jitter=s.jitter, harness=harness)
