"""Train a mechanism on each of the 12 matrix games and export comparison
curves against the fixed one-memory strategies (the Fig. 1/2-style sweep).

Usage:
    python scripts/run_matrix_suite.py --method diff-md --outer-steps 2000 \
        --seeds 5 --out-dir results/matrix
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from shepherd import checkpoints, evalharness, games, training

BASELINES = ("TitForTat", "AllC", "AllD", "WinStayLoseShift", "Grim")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--method", default="diff-md", choices=training.METHODS)
    parser.add_argument("--outer-steps", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--seeds", type=int, default=5, help="evaluation seeds")
    parser.add_argument("--steps", type=int, default=50, help="evaluation horizon")
    parser.add_argument("--out-dir", default="results/matrix")
    parser.add_argument("--games", nargs="*", help="subset of game names")
    args = parser.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    selected = args.games or [g.name for g in games.enumerate_games()]
    for name in selected:
        env = training.MatrixGameEnv(games.MatrixGameMDP(games.game_by_name(name)))
        config = training.matrix_defaults(outer_steps=args.outer_steps, seed=args.seed)
        started = time.time()
        result = training.run_inner_outer(env, args.method, config)
        ckpt_path = os.path.join(args.out_dir, f"{name}_{args.method}.json")
        checkpoints.save(checkpoints.from_result(env, result), ckpt_path)

        mechanisms = {"IO-Loop": result.params}
        mechanisms.update({b: b for b in BASELINES})
        curves, summary = evalharness.compare_suite(
            env, mechanisms, n_seeds=args.seeds, steps=args.steps, base_seed=args.seed
        )
        evalharness.export_curves(curves, args.out_dir, env_label=f"game-{name}")
        best = max(r["final_mean"] for r in summary if r["mechanism"] != "IO-Loop")
        io = summary[0]["final_mean"]
        print(
            f"{name:18s} IO-Loop {io:+.4f} best-fixed {best:+.4f} "
            f"delta {io - best:+.4f} ({time.time() - started:.0f}s)"
        )


if __name__ == "__main__":
    main()
