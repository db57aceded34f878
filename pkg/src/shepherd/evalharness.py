"""Evaluation: frozen mechanisms paired with freshly learning participants.

A mechanism is scored by freezing it and letting a new participant learn
against it for a fixed number of steps, recording the mechanism return at
every participant step; curves are averaged over seeds. Mechanisms compared
in one suite see identical seed-indexed participant initializations, which
pairs the comparison and removes init variance from the ranking.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import checkpoints, policies, training
from .errors import ConfigError

DEFAULT_SEEDS = 5


def worker_count() -> int:
    """Worker cap for seed-parallel evaluation (SHEPHERD_THREADS env var)."""
    raw = os.environ.get("SHEPHERD_THREADS", "").strip()
    if raw:
        return max(1, int(raw))
    return min(8, os.cpu_count() or 1)


@dataclass
class LearningCurve:
    """Per-seed mechanism returns indexed (seed, participant step)."""

    label: str
    returns: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def n_seeds(self) -> int:
        return self.returns.shape[0]

    @property
    def n_steps(self) -> int:
        return self.returns.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.returns.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        if self.n_seeds == 1:
            return np.zeros(self.n_steps)
        return self.returns.std(axis=0, ddof=1) / np.sqrt(self.n_seeds)

    @property
    def final_mean(self) -> float:
        return float(self.mean[-1])

    @property
    def auc_mean(self) -> float:
        return float(self.mean.mean())


def resolve_mechanism(env, mechanism):
    """Accepts a mechanism object, parameter array, fixed-strategy or
    baseline name, FixedStrategy, or a checkpoint path / Checkpoint."""
    if isinstance(mechanism, str):
        if isinstance(env, training.MatrixGameEnv):
            if policies.is_fixed_strategy_name(mechanism):
                return policies.MatrixMechanism.from_strategy(
                    policies.FixedStrategy(mechanism)
                )
        elif mechanism in policies.BASELINE_KINDS:
            return policies.BaselineMechanism(mechanism)
        if os.path.exists(mechanism):
            return resolve_mechanism(env, checkpoints.load(mechanism))
        raise ConfigError(f"cannot resolve mechanism {mechanism!r} for {env.kind}")
    if isinstance(mechanism, checkpoints.Checkpoint):
        if mechanism.env["kind"] != env.kind:
            raise ConfigError(
                f"checkpoint environment {mechanism.env['kind']!r} does not match {env.kind!r}"
            )
        resolved = env.mechanism_from_params(mechanism.mech_params())
        return resolved
    if isinstance(mechanism, policies.FixedStrategy):
        if not isinstance(env, training.MatrixGameEnv):
            raise ConfigError("fixed one-memory strategies apply to matrix games only")
        return policies.MatrixMechanism.from_strategy(mechanism)
    if isinstance(mechanism, np.ndarray):
        return env.mechanism_from_params(mechanism)
    if hasattr(mechanism, "shares_and_own_grads") or hasattr(mechanism, "coop"):
        return mechanism
    raise ConfigError(f"cannot resolve mechanism of type {type(mechanism).__name__}")


def _seed_rng(base_seed: int, seed_index: int) -> np.random.Generator:
    return np.random.default_rng([int(base_seed), int(seed_index)])


def _run_seed(env, mechanism, seed_index, base_seed, steps, part_lr):
    rng = _seed_rng(base_seed, seed_index)
    episode_env, theta_p0 = env.sample_inner(rng)
    trace = training.run_inner_loop(
        episode_env, mechanism, theta_p0, steps, part_lr, rng=rng
    )
    return trace.mech_return_values()


def default_eval_settings(env) -> tuple[int, float]:
    """(steps, part_lr) matching the environment's training defaults."""
    if isinstance(env, training.MatrixGameEnv):
        return 50, 10.0
    return 10, 0.1


def evaluate_mechanism(
    env,
    mechanism,
    n_seeds: int = DEFAULT_SEEDS,
    steps: int | None = None,
    part_lr: float | None = None,
    base_seed: int = 0,
    label: str | None = None,
) -> LearningCurve:
    """Freeze ``mechanism`` and record its return at every participant step.

    Each seed draws a fresh participant initialization (and endowments, if
    the environment resamples them); the participant then runs plain
    gradient ascent while the mechanism stays fixed.
    """
    resolved = resolve_mechanism(env, mechanism)
    default_steps, default_lr = default_eval_settings(env)
    if steps is None:
        steps = default_steps
    if part_lr is None:
        part_lr = default_lr
    workers = min(worker_count(), n_seeds)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(
                    lambda k: _run_seed(env, resolved, k, base_seed, steps, part_lr),
                    range(n_seeds),
                )
            )
    else:
        rows = [_run_seed(env, resolved, k, base_seed, steps, part_lr) for k in range(n_seeds)]
    return LearningCurve(
        label=label or getattr(resolved, "label", "mechanism"),
        returns=np.stack(rows),
        config={
            "env": env.kind,
            "n_seeds": n_seeds,
            "steps": steps,
            "part_lr": part_lr,
            "base_seed": base_seed,
        },
    )


def compare_suite(
    env,
    mechanisms,
    n_seeds: int = DEFAULT_SEEDS,
    steps: int | None = None,
    part_lr: float | None = None,
    base_seed: int = 0,
) -> tuple[dict[str, LearningCurve], list[dict]]:
    """Evaluate several mechanisms on identical seed-indexed participant draws.

    ``mechanisms`` maps labels to anything ``resolve_mechanism`` accepts.
    Returns the curves plus summary rows (final-step and area-under-curve
    means), ordered as given.
    """
    if not mechanisms:
        raise ConfigError("compare_suite requires at least one mechanism")
    curves: dict[str, LearningCurve] = {}
    summary = []
    for mech_label, mechanism in mechanisms.items():
        curve = evaluate_mechanism(
            env,
            mechanism,
            n_seeds=n_seeds,
            steps=steps,
            part_lr=part_lr,
            base_seed=base_seed,
            label=mech_label,
        )
        curves[mech_label] = curve
        summary.append(
            {
                "mechanism": mech_label,
                "final_mean": curve.final_mean,
                "auc_mean": curve.auc_mean,
            }
        )
    return curves, summary


# -- export ----------------------------------------------------------------------


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def export_curves(curves, out_dir, env_label: str, render: bool = False) -> list[str]:
    """Write per-curve CSVs plus one aggregate CSV; optionally render SVG.

    Per-curve files ``<env>_<mechanism>_<seeds>.csv`` hold
    ``mechanism,seed,step,return`` rows; the aggregate file holds
    ``mechanism,step,mean,stderr``. Floats are written with full
    round-trip precision.
    """
    os.makedirs(out_dir, exist_ok=True)
    if isinstance(curves, dict):
        curves = list(curves.values())
    paths = []
    aggregate_rows = []
    n_seeds = curves[0].n_seeds if curves else 0
    for curve in curves:
        safe = curve.label.replace(" ", "-").replace("/", "-")
        path = os.path.join(out_dir, f"{env_label}_{safe}_{curve.n_seeds}.csv")
        rows = [
            (curve.label, seed, step, repr(float(curve.returns[seed, step])))
            for seed in range(curve.n_seeds)
            for step in range(curve.n_steps)
        ]
        _write_rows(path, ("mechanism", "seed", "step", "return"), rows)
        paths.append(path)
        mean, stderr = curve.mean, curve.stderr
        aggregate_rows.extend(
            (curve.label, step, repr(float(mean[step])), repr(float(stderr[step])))
            for step in range(curve.n_steps)
        )
    agg_path = os.path.join(out_dir, f"{env_label}_aggregate_{n_seeds}.csv")
    _write_rows(agg_path, ("mechanism", "step", "mean", "stderr"), aggregate_rows)
    paths.append(agg_path)
    if render and curves:
        paths.append(_render_svg(curves, out_dir, env_label))
    return paths


def _render_svg(curves, out_dir, env_label):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in curves:
        steps = np.arange(curve.n_steps)
        ax.plot(steps, curve.mean, label=curve.label)
        ax.fill_between(
            steps, curve.mean - curve.stderr, curve.mean + curve.stderr, alpha=0.2
        )
    ax.set_xlabel("participant learning step")
    ax.set_ylabel("mechanism return")
    ax.legend(fontsize=8)
    path = os.path.join(out_dir, f"{env_label}_curves.svg")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return path


def load_curve_csv(path) -> LearningCurve:
    """Round-trip loader for the per-curve CSV schema."""
    by_seed: dict[int, dict[int, float]] = {}
    label = "mechanism"
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            label = row["mechanism"]
            by_seed.setdefault(int(row["seed"]), {})[int(row["step"])] = float(
                row["return"]
            )
    if not by_seed:
        return LearningCurve(label=label, returns=np.zeros((0, 0)))
    seeds = sorted(by_seed)
    steps = sorted(by_seed[seeds[0]])
    returns = np.array([[by_seed[s][t] for t in steps] for s in seeds])
    return LearningCurve(label=label, returns=returns)
