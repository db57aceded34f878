import json

import numpy as np
import pytest

from shepherd import checkpoints, games, training
from shepherd.errors import CheckpointError

PD_ENV = training.MatrixGameEnv(games.MatrixGameMDP(games.game_by_name("PrisonersDilemma")))


def trained_result(env=PD_ENV, method="diff-md", **overrides):
    cfg = training.matrix_defaults(outer_steps=2, inner_steps=3, seed=4, **overrides)
    return training.run_inner_outer(env, method, cfg)


def test_round_trip_is_byte_identical(tmp_path):
    ckpt = checkpoints.from_result(PD_ENV, trained_result())
    path = tmp_path / "mech.json"
    checkpoints.save(ckpt, path)
    first = path.read_bytes()
    reloaded = checkpoints.load(path)
    checkpoints.save(reloaded, path)
    assert path.read_bytes() == first


def test_parameters_survive_round_trip(tmp_path):
    result = trained_result()
    ckpt = checkpoints.from_result(PD_ENV, result)
    path = tmp_path / "mech.json"
    checkpoints.save(ckpt, path)
    loaded = checkpoints.load(path)
    np.testing.assert_array_equal(loaded.mech_params(), result.params)
    env = loaded.build_env()
    assert env.mdp.spec == PD_ENV.mdp.spec
    assert env.mdp.discount == PD_ENV.mdp.discount


def test_pgg_checkpoint_round_trip(tmp_path):
    env = training.PggEnv(resample_endowments=True)
    cfg = training.pgg_defaults(outer_steps=1, inner_steps=2, seed=0)
    result = training.run_inner_outer(env, "diff-md", cfg)
    ckpt = checkpoints.from_result(env, result)
    path = tmp_path / "net.json"
    checkpoints.save(ckpt, path)
    loaded = checkpoints.load(path)
    np.testing.assert_array_equal(loaded.mech_params(), result.params)
    rebuilt = loaded.build_env()
    assert rebuilt.kind == "pgg"
    assert rebuilt.resample_endowments


def test_version_mismatch_rejected(tmp_path):
    ckpt = checkpoints.from_result(PD_ENV, trained_result())
    path = tmp_path / "mech.json"
    checkpoints.save(ckpt, path)
    payload = json.loads(path.read_text())
    payload["format_version"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises(CheckpointError, match="version"):
        checkpoints.load(path)


def test_corrupt_checkpoint_reports_offset(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"format_version": 1, "env": ???')
    with pytest.raises(CheckpointError, match="offset"):
        checkpoints.load(path)


def test_missing_file_raises(tmp_path):
    with pytest.raises(CheckpointError):
        checkpoints.load(tmp_path / "nope.json")


def test_missing_fields_rejected(tmp_path):
    path = tmp_path / "partial.json"
    path.write_text(json.dumps({"format_version": 1, "env": {}, "seed": 0}))
    with pytest.raises(CheckpointError, match="missing"):
        checkpoints.load(path)
