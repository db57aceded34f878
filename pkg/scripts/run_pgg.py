"""Train the redistribution mechanism on the resource-allocation game and
compare it with the four baseline rules (the Fig. 3-left protocol).

Usage:
    python scripts/run_pgg.py --outer-steps 5000 --seeds 50 --out-dir results/pgg
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from shepherd import checkpoints, evalharness, policies, training


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--method", default="diff-md", choices=training.METHODS)
    parser.add_argument("--outer-steps", type=int, default=5000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--seeds", type=int, default=50, help="evaluation seeds")
    parser.add_argument("--steps", type=int, default=10, help="evaluation horizon")
    parser.add_argument("--out-dir", default="results/pgg")
    parser.add_argument("--render", action="store_true", help="write an SVG plot too")
    parser.add_argument(
        "--resample-endowments",
        action="store_true",
        help="draw fresh endowments from [0.2, 1.0] each training episode",
    )
    args = parser.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    train_env = training.PggEnv(resample_endowments=args.resample_endowments)
    config = training.pgg_defaults(outer_steps=args.outer_steps, seed=args.seed)
    started = time.time()
    result = training.run_inner_outer(train_env, args.method, config)
    print(f"trained in {time.time() - started:.0f}s")
    ckpt_path = os.path.join(args.out_dir, f"pgg_{args.method}.json")
    checkpoints.save(checkpoints.from_result(train_env, result), ckpt_path)
    print(f"checkpoint: {ckpt_path}")

    eval_env = training.PggEnv()  # fixed endowments [1.0, 0.5, 0.4, 0.3]
    mechanisms = {"IO-Loop": result.params}
    mechanisms.update({b: b for b in policies.BASELINE_KINDS})
    curves, summary = evalharness.compare_suite(
        eval_env, mechanisms, n_seeds=args.seeds, steps=args.steps, base_seed=args.seed
    )
    evalharness.export_curves(curves, args.out_dir, env_label="pgg", render=args.render)
    for row in summary:
        print(
            f"{row['mechanism']:22s} final {row['final_mean']:+.4f} "
            f"auc {row['auc_mean']:+.4f}"
        )


if __name__ == "__main__":
    main()
