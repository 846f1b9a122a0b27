"""Command-line entry point: the full workflow as composable subcommands.

    myoexo synergy  --out DIR                 extract the synergy basis
    myoexo train    --condition exo|noexo     two-stage teacher training
    myoexo distill  --teacher RUNDIR          student dataset + training
    myoexo eval     --assisted DIR --baseline DIR [--student CKPT]
    myoexo verify   --run DIR                 integrity + invariant re-check
    myoexo replay   --run DIR --episode CSV   deterministic re-execution

Exit codes: 0 success, 2 config error, 3 insufficient data, 4 unstable
simulation, 5 unstable teacher, 6 grid mismatch, 7 verification mismatch.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    build_config,
    load_config,
    make_env_factory,
    make_sac_config,
    make_stage0_config,
    make_student_net,
    save_config,
)
from .rng import substream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_UNSTABLE = 4
EXIT_TEACHER = 5
EXIT_GRID = 6
EXIT_VERIFY = 7


def _resolve_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config, profile=args.profile)
    else:
        cfg = build_config({}, profile=args.profile or "desk")
    if args.seed is not None:
        cfg.seed = args.seed
    elif os.environ.get("MYOEXO_SEED"):
        cfg.seed = int(os.environ["MYOEXO_SEED"])
    if args.out:
        cfg.out_dir = args.out
    elif os.environ.get("MYOEXO_OUT"):
        cfg.out_dir = os.environ["MYOEXO_OUT"]
    return cfg


def _prepare_run_dir(cfg: RunConfig, name: str) -> str:
    run_dir = os.path.join(cfg.out_dir, name)
    os.makedirs(run_dir, exist_ok=True)
    save_config(os.path.join(run_dir, "config.yaml"), cfg)
    return run_dir


def _finish(run_dir: str) -> None:
    from .manifest import write_manifest

    write_manifest(run_dir, __version__)


# -- subcommands ---------------------------------------------------------------

def cmd_synergy(args) -> int:
    from .config import make_env_config, make_model, make_muscles
    from .locomotion_env import LocomotionEnv
    from .stage0 import right_leg_activation_matrix, scripted_rollout
    from .synergy import (InsufficientStrides, extract_basis_from_rollouts,
                          save_basis_csv)

    cfg = _resolve_config(args)
    run_dir = _prepare_run_dir(cfg, "synergy")
    s0 = make_stage0_config(cfg)
    logs = []
    for i, speed in enumerate(s0.speeds):
        env = LocomotionEnv(cfg=make_env_config(cfg), model=make_model(cfg),
                            muscles=make_muscles(cfg),
                            rng=substream(cfg.seed, f"stage0/{i}"))
        logs.append(scripted_rollout(
            env, speed, s0.slope_deg, s0.duration_s,
            substream(cfg.seed, f"stage0/{i}/jitter"),
            amplitude=s0.amplitude, jitter=s0.jitter, harness=s0.harness))
    matrix = right_leg_activation_matrix(logs, cfg.env.control_hz)
    try:
        basis = extract_basis_from_rollouts(
            matrix, cfg.synergy.rank, restarts=cfg.synergy.restarts,
            max_iters=cfg.synergy.max_iters, tol=cfg.synergy.tol,
            seed=cfg.seed,
            muscle_names=[f"m{i}" for i in range(matrix.values.shape[0])])
    except InsufficientStrides as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    save_basis_csv(os.path.join(run_dir, "basis.csv"), basis)
    with open(os.path.join(run_dir, "vaf_report.txt"), "w") as f:
        f.write(f"rank: {basis.rank}\n")
        f.write(f"strides: {matrix.n_strides}\n")
        f.write(f"vaf: {basis.vaf!r}\n")
    _finish(run_dir)
    print(f"basis written to {run_dir} (rank {basis.rank}, "
          f"VAF {basis.vaf:.4f}, {matrix.n_strides} strides)")
    return EXIT_OK


def cmd_train(args) -> int:
    from .synergy import load_basis_csv
    from .trainer import TrainingUnstable, train

    cfg = _resolve_config(args)
    basis = None
    if cfg.env.kind == "locomotion":
        basis_path = args.basis or os.path.join(cfg.out_dir, "synergy",
                                                "basis.csv")
        if not os.path.exists(basis_path):
            print(f"error: synergy basis not found at {basis_path}",
                  file=sys.stderr)
            return EXIT_CONFIG
        basis = load_basis_csv(basis_path)
    run_dir = _prepare_run_dir(cfg, f"train_{args.condition}")
    if basis is not None:
        shutil.copyfile(basis_path, os.path.join(run_dir, "basis.csv"))
    try:
        summary = train(make_sac_config(cfg), args.condition,
                        make_env_factory(cfg, basis=basis), run_dir,
                        seed=cfg.seed, workers=args.workers,
                        resume=args.resume)
    except TrainingUnstable as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNSTABLE
    _finish(run_dir)
    print(f"training finished: {summary}")
    return EXIT_OK


def _load_actor_policy(run_dir: str):
    from .netcore import gaussian_head_deterministic, load_net
    from .trainer import latest_checkpoint

    ckpt = latest_checkpoint(run_dir)
    if ckpt is None:
        raise FileNotFoundError(f"no checkpoint in {run_dir}")
    actor, _ = load_net(os.path.join(ckpt, "actor.net"))

    def action_fn(obs):
        out, _ = actor.forward(np.asarray(obs, dtype=np.float32)[None, :])
        return gaussian_head_deterministic(out)[0].astype(np.float64)

    return action_fn, actor


def cmd_distill(args) -> int:
    from .distill import (TeacherUnstable, build_dataset, evaluate_agreement,
                          predict, save_dataset, teacher_rollouts,
                          train_student)
    from .netcore import save_net
    from .synergy import load_basis_csv

    cfg = _resolve_config(args)
    teacher_cfg_path = os.path.join(args.teacher, "config.yaml")
    basis_path = os.path.join(args.teacher, "basis.csv")
    if not (os.path.isdir(args.teacher) and os.path.exists(teacher_cfg_path)
            and os.path.exists(basis_path)):
        print(f"error: teacher run dir incomplete: {args.teacher}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        action_fn, _ = _load_actor_policy(args.teacher)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    teacher_cfg = load_config(teacher_cfg_path)
    basis = load_basis_csv(basis_path)
    run_dir = _prepare_run_dir(cfg, "distill")
    factory = make_env_factory(teacher_cfg, basis=basis)
    counter = [0]

    def env_factory():
        counter[0] += 1
        return factory(substream(cfg.seed, f"distill/env/{counter[0]}"))

    d = cfg.distill
    logs = teacher_rollouts(action_fn, env_factory, d.slopes, d.speeds,
                            d.duration_s)
    try:
        dataset = build_dataset(logs, substream(cfg.seed, "distill"),
                                val_fraction=d.val_fraction,
                                max_fall_rate=d.max_fall_rate)
    except TeacherUnstable as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_TEACHER
    save_dataset(os.path.join(run_dir, "dataset.bin"), dataset)

    net = make_student_net(cfg, rng=substream(cfg.seed, "distill/init"))
    train_losses, val_losses = train_student(
        dataset, net, substream(cfg.seed, "distill/train"),
        epochs=d.epochs, lr=d.lr, batch_size=d.batch_size)
    preds = predict(net, dataset, dataset.val_idx)
    r2 = evaluate_agreement(dataset.labels[dataset.val_idx], preds)
    save_net(os.path.join(run_dir, "student.net"), net,
             extra={"norm_mean": dataset.norm_mean,
                    "norm_std": dataset.norm_std,
                    "teacher": os.path.abspath(args.teacher)})
    with open(os.path.join(run_dir, "distill_report.csv"), "w") as f:
        f.write("epoch,train_mse,val_mse\n")
        for i, (tr, va) in enumerate(zip(train_losses, val_losses), 1):
            f.write(f"{i},{tr!r},{va!r}\n")
        f.write(f"heldout_r2,{r2!r},\n")
    _finish(run_dir)
    print(f"student trained: val MSE {val_losses[-1]:.5f}, "
          f"held-out R^2 {r2:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evalreport import run_evaluation
    from .gait_eval import GridMismatch

    cfg = _resolve_config(args)
    for d in (args.assisted, args.baseline):
        if not (os.path.isdir(d) and os.path.exists(os.path.join(d, "config.yaml"))):
            print(f"error: run dir missing or incomplete: {d}", file=sys.stderr)
            return EXIT_GRID
    try:
        run_dir = run_evaluation(cfg, args.assisted, args.baseline,
                                 student_ckpt=args.student)
    except GridMismatch as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GRID
    _finish(run_dir)
    print(f"evaluation written to {run_dir}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .manifest import verify_manifest
    from .verifysuite import run_fast_checks

    if not os.path.exists(os.path.join(args.run, "manifest.json")):
        print(f"error: no manifest in {args.run}", file=sys.stderr)
        return EXIT_VERIFY
    problems = verify_manifest(args.run)
    for p in problems:
        print(f"manifest: {p}", file=sys.stderr)
    for name, failure in run_fast_checks():
        if failure is None:
            print(f"check {name}: ok")
        else:
            print(f"check {name}: FAIL ({failure})", file=sys.stderr)
            problems.append(name)
    return EXIT_VERIFY if problems else EXIT_OK


def cmd_replay(args) -> int:
    from .replaycmd import replay_episode

    ok, detail = replay_episode(args.run, args.episode)
    print(detail)
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="myoexo",
        description="planar neuromusculoskeletal exoskeleton lab")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--profile", choices=("desk", "paper"))
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output root (MYOEXO_OUT)")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("synergy", help="extract the synergy basis")
    common(p)

    p = sub.add_parser("train", help="two-stage teacher training")
    common(p)
    p.add_argument("--condition", choices=("exo", "noexo"), required=True)
    p.add_argument("--basis", help="path to basis.csv")
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("distill", help="distill the teacher into the student")
    common(p)
    p.add_argument("--teacher", required=True, help="teacher run directory")

    p = sub.add_parser("eval", help="assistance-effect evaluation")
    common(p)
    p.add_argument("--assisted", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--student", help="student checkpoint for closed-loop eval")

    p = sub.add_parser("verify", help="verify a run directory")
    p.add_argument("--run", required=True)

    p = sub.add_parser("replay", help="replay a logged episode")
    p.add_argument("--run", required=True, help="run dir with config/basis")
    p.add_argument("--episode", required=True, help="episode CSV")

    args = parser.parse_args(argv)
    try:
        handler = {
            "synergy": cmd_synergy, "train": cmd_train,
            "distill": cmd_distill, "eval": cmd_eval,
            "verify": cmd_verify, "replay": cmd_replay,
        }[args.command]
        return handler(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
