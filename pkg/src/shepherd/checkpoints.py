"""Human-readable checkpoint files for trained mechanisms.

Checkpoints are canonical JSON (sorted keys, two-space indent, trailing
newline) with floats serialized by ``repr``, which round-trips exactly:
save -> load -> save is byte-identical. The format version is checked on
load and never silently coerced.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import games, policies, training
from .errors import CheckpointError

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    env: dict
    policy: dict
    train_config: dict
    seed: int
    history: dict
    format_version: int = FORMAT_VERSION

    def to_json(self) -> str:
        payload = {
            "format_version": self.format_version,
            "env": self.env,
            "policy": self.policy,
            "train_config": self.train_config,
            "seed": self.seed,
            "history": self.history,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def build_env(self):
        if self.env["kind"] == "matrix_game":
            g = self.env["game"]
            spec = games.GameSpec(g["rR"], g["rS"], g["rT"], g["rP"], name=g.get("name"))
            return training.MatrixGameEnv(
                games.MatrixGameMDP(spec, discount=self.env["discount"])
            )
        if self.env["kind"] == "pgg":
            return training.PggEnv(
                spec=games.PggSpec(
                    endowments=tuple(self.env["endowments"]),
                    growth=self.env["growth"],
                ),
                resample_endowments=self.env.get("resample_endowments", False),
            )
        raise CheckpointError(f"unknown environment kind {self.env['kind']!r}")

    def mech_params(self) -> np.ndarray:
        kind = self.policy["kind"]
        if kind == "one_memory_logits":
            return np.asarray(self.policy["params"], dtype=float)
        if kind == "mechanism_net":
            net = policies.MechanismNet(
                w1=np.asarray(self.policy["w1"], dtype=float),
                b1=np.asarray(self.policy["b1"], dtype=float),
                w2=np.asarray(self.policy["w2"], dtype=float),
                b2=np.asarray(self.policy["b2"], dtype=float),
            )
            return net.flatten()
        raise CheckpointError(f"unknown policy kind {kind!r}")


def describe_env(env) -> dict:
    if isinstance(env, training.MatrixGameEnv):
        spec = env.mdp.spec
        game = {"rR": spec.r_R, "rS": spec.r_S, "rT": spec.r_T, "rP": spec.r_P}
        if spec.name:
            game["name"] = spec.name
        return {"kind": "matrix_game", "game": game, "discount": env.mdp.discount}
    if isinstance(env, training.PggEnv):
        return {
            "kind": "pgg",
            "endowments": [float(x) for x in env.spec.endowment_array],
            "growth": env.spec.growth,
            "n_participants": env.spec.n_participants,
            "resample_endowments": bool(env.resample_endowments),
        }
    raise CheckpointError(f"cannot describe environment {type(env).__name__}")


def describe_policy(env, params: np.ndarray) -> dict:
    if isinstance(env, training.MatrixGameEnv):
        return {"kind": "one_memory_logits", "params": [float(x) for x in params]}
    net = policies.MechanismNet.from_flat(np.asarray(params, dtype=float))
    return {
        "kind": "mechanism_net",
        "w1": [[float(x) for x in row] for row in net.w1],
        "b1": [float(x) for x in net.b1],
        "w2": [[float(x) for x in row] for row in net.w2],
        "b2": [float(x) for x in net.b2],
    }


def from_result(env, result: training.TrainResult) -> Checkpoint:
    history = result.history
    digest = {
        "outer_steps": len(history),
        "final_mean_inner_return": float(history[-1]) if history else None,
    }
    return Checkpoint(
        env=describe_env(env),
        policy=describe_policy(env, result.params),
        train_config=asdict(result.config) | {"method": result.method},
        seed=result.config.seed,
        history=digest,
    )


def save(checkpoint: Checkpoint, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(checkpoint.to_json())
    except OSError as err:
        raise CheckpointError(f"cannot write checkpoint {path}: {err}") from err


def load(path) -> Checkpoint:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as err:
        raise CheckpointError(
            f"corrupt checkpoint {path}: {err.msg} at offset {err.pos}"
        ) from err
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version!r} (expected {FORMAT_VERSION})"
        )
    missing = {"env", "policy", "train_config", "seed", "history"} - payload.keys()
    if missing:
        raise CheckpointError(f"checkpoint {path} missing fields: {sorted(missing)}")
    return Checkpoint(
        env=payload["env"],
        policy=payload["policy"],
        train_config=payload["train_config"],
        seed=payload["seed"],
        history=payload["history"],
    )
