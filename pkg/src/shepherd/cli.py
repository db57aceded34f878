"""Command-line entry point: train, evaluate, list games, inspect, serve.

Paper-configuration hyperparameters are the flag defaults, so bare commands
reproduce the reference experiments. Exit codes: 0 success, 2 usage error,
3 data/IO error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import checkpoints, evalharness, games, training
from .errors import (
    CheckpointError,
    ConfigError,
    DomainError,
    NumericalError,
    ShepherdError,
)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _add_env_argument(parser):
    parser.add_argument(
        "--env",
        required=True,
        help="environment: 'pgg' or 'game:<Name>' (see the games command)",
    )
    parser.add_argument(
        "--discount", type=float, default=games.DEFAULT_DISCOUNT,
        help="per-step discount for matrix games",
    )


def _build_env(args):
    try:
        if args.env == "pgg":
            return training.PggEnv(
                resample_endowments=getattr(args, "resample_endowments", False)
            )
        return training.make_env(args.env, discount=args.discount)
    except DomainError as err:
        raise ConfigError(str(err)) from err


def _config_for(args) -> training.TrainConfig:
    base = (
        training.pgg_defaults() if args.env == "pgg" else training.matrix_defaults()
    )
    overrides = {
        "seed": args.seed,
        "outer_steps": args.outer_steps,
        "inner_steps": args.inner_steps,
        "mech_lr": args.mech_lr,
        "part_lr": args.part_lr,
        "es_batch": args.es_batch,
        "es_sigma": args.es_sigma,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    from dataclasses import replace

    return replace(base, **overrides)


def _write_history_csv(path, history):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("outer_step", "mean_inner_return"))
        writer.writerows((step, repr(float(r))) for step, r in enumerate(history))


def cmd_train(args) -> int:
    env = _build_env(args)
    config = _config_for(args)
    result = training.run_inner_outer(env, args.method, config)
    checkpoint = checkpoints.from_result(env, result)
    checkpoints.save(checkpoint, args.out)
    history_path = args.history or (args.out + ".history.csv")
    _write_history_csv(history_path, result.history)
    print(f"checkpoint written to {args.out}")
    print(f"history written to {history_path}")
    print(f"final mean inner return: {result.history[-1]!r}")
    return 0


def cmd_eval(args) -> int:
    env = _build_env(args)
    mechanisms: dict[str, object] = {}
    for path in args.checkpoints:
        ckpt = checkpoints.load(path)
        if args.label and len(args.checkpoints) == 1:
            label = args.label
        else:
            import os as _os

            stem = _os.path.splitext(_os.path.basename(path))[0]
            label = f"IO-Loop[{stem}]"
        mechanisms[label] = ckpt
    for name in args.baseline:
        mechanisms[name] = name
    if not mechanisms:
        raise ConfigError("nothing to evaluate: give checkpoint paths and/or --baseline")
    curves, summary = evalharness.compare_suite(
        env,
        mechanisms,
        n_seeds=args.seeds,
        steps=args.steps,
        part_lr=args.part_lr,
        base_seed=args.seed,
    )
    paths = evalharness.export_curves(
        curves, args.out_dir, env_label=args.env.replace(":", "-"), render=args.render
    )
    for row in summary:
        print(
            f"{row['mechanism']}: final-step mean {row['final_mean']!r}, "
            f"area-under-curve mean {row['auc_mean']!r}"
        )
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_games(args) -> int:
    specs = games.enumerate_games()
    if args.name:
        matches = [s for s in specs if s.name == args.name]
        if not matches:
            names = ", ".join(s.name for s in specs)
            print(f"unknown game {args.name!r}; valid names: {names}", file=sys.stderr)
            return EXIT_USAGE
        specs = matches
    for spec in specs:
        print(f"{spec.name:18s} (r_R, r_S, r_T, r_P) = {spec.payoffs}")
    return 0


def cmd_inspect(args) -> int:
    ckpt = checkpoints.load(args.checkpoint)
    print(f"format version: {ckpt.format_version}")
    print(f"environment:    {ckpt.env}")
    print(f"policy kind:    {ckpt.policy['kind']}")
    params = ckpt.mech_params()
    print(f"parameters:     {params.size} values, max |param| {np.max(np.abs(params))!r}")
    print(f"seed:           {ckpt.seed}")
    print(f"training:       {ckpt.train_config}")
    print(f"history:        {ckpt.history}")
    return 0


def cmd_serve(args) -> int:
    from . import playservice

    playservice.serve(host=args.host, port=args.port, frontend_dir=args.frontend)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shepherd",
        description="train and evaluate mechanism agents paired with learning co-players",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the inner-outer training loop")
    _add_env_argument(p_train)
    p_train.add_argument("--method", required=True, choices=training.METHODS)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--history", help="history CSV path (default: <out>.history.csv)")
    p_train.add_argument("--outer-steps", type=int, dest="outer_steps")
    p_train.add_argument("--inner-steps", type=int, dest="inner_steps")
    p_train.add_argument("--mech-lr", type=float, dest="mech_lr")
    p_train.add_argument("--part-lr", type=float, dest="part_lr")
    p_train.add_argument("--es-batch", type=int, dest="es_batch")
    p_train.add_argument("--es-sigma", type=float, dest="es_sigma")
    p_train.add_argument(
        "--resample-endowments",
        action="store_true",
        dest="resample_endowments",
        help="pgg only: draw fresh endowments from [0.2, 1.0] each episode",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate frozen mechanisms vs learning participants")
    _add_env_argument(p_eval)
    p_eval.add_argument("checkpoints", nargs="*", help="checkpoint paths")
    p_eval.add_argument(
        "--baseline", action="append", default=[],
        help="fixed strategy or redistribution baseline name (repeatable)",
    )
    p_eval.add_argument("--seeds", type=int, default=5)
    p_eval.add_argument("--steps", type=int, default=None)
    p_eval.add_argument("--part-lr", type=float, dest="part_lr", default=None)
    p_eval.add_argument("--seed", type=int, default=0, help="base seed for paired draws")
    p_eval.add_argument("--out-dir", default="curves")
    p_eval.add_argument("--label", help="label for checkpoint curves")
    p_eval.add_argument("--render", action="store_true", help="also write an SVG plot")
    p_eval.set_defaults(func=cmd_eval)

    p_games = sub.add_parser("games", help="list the 12 canonical matrix games")
    p_games.add_argument("--name", help="show a single game by name")
    p_games.set_defaults(func=cmd_games)

    p_inspect = sub.add_parser("inspect", help="summarize a checkpoint file")
    p_inspect.add_argument("checkpoint")
    p_inspect.set_defaults(func=cmd_inspect)

    p_serve = sub.add_parser("serve", help="launch the human-play session service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--frontend", help="directory of static web client files")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (CheckpointError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ShepherdError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
