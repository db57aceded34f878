import numpy as np
import pytest

from shepherd import dual, games, policies, training
from shepherd.errors import ConfigError, NumericalError

from conftest import rel_error

PD_ENV = training.MatrixGameEnv(games.MatrixGameMDP(games.game_by_name("PrisonersDilemma")))


def pgg_env():
    return training.PggEnv()


def small_cfg(**overrides):
    base = dict(outer_steps=3, inner_steps=5, seed=11)
    base.update(overrides)
    return training.matrix_defaults(**base)


# -- participant gradient ----------------------------------------------------------


def test_participant_grad_flees_alld(rng):
    # against a pure defector, defecting dominates: all logits pushed down
    allc_logits = np.full(5, 3.0)
    grad = training.participant_grad(PD_ENV, np.full(5, -40.0), allc_logits)
    assert np.all(grad[1:] < 0)  # any reachable state favors defecting
    h = 1e-5
    for i in range(5):
        bump = np.zeros(5)
        bump[i] = h
        mech = PD_ENV.mechanism_from_params(np.full(5, -40.0))
        up = PD_ENV.returns(mech, allc_logits + bump)[1]
        dn = PD_ENV.returns(mech, allc_logits - bump)[1]
        fd = (up - dn) / (2 * h)
        assert rel_error(grad[i], fd) < 1e-5


def test_pgg_uniform_gradient_is_free_riding(rng):
    env = pgg_env()
    rho = rng.uniform(0.1, 0.9, size=4)
    grad = training.participant_grad(env, policies.BaselineMechanism("Uniform"), rho)
    e = env.spec.endowment_array
    # d R_i / d rho_i = 1.6 e_i / 4 - e_i < 0 for every participant
    np.testing.assert_allclose(grad, 1.6 * e / 4 - e, atol=1e-12)
    assert np.all(grad < 0)


def test_pgg_squashed_variant_scales_by_sigmoid_slope(rng):
    env = training.PggEnv(squash_propensities=True)
    theta = rng.normal(size=4)
    grad = training.participant_grad(env, policies.BaselineMechanism("Uniform"), theta)
    rho = dual.sigmoid(theta)
    e = env.spec.endowment_array
    np.testing.assert_allclose(grad, (1.6 * e / 4 - e) * rho * (1 - rho), atol=1e-12)


def test_participant_grad_matches_fd_random_envs(rng):
    for spec in games.enumerate_games()[:4]:
        env = training.MatrixGameEnv(games.MatrixGameMDP(spec))
        theta_m, theta_p = rng.normal(size=5), rng.normal(size=5)
        mech = env.mechanism_from_params(theta_m)
        grad = training.participant_grad(env, theta_m, theta_p)
        h = 1e-5
        for i in range(5):
            bump = np.zeros(5)
            bump[i] = h
            fd = (
                env.returns(mech, theta_p + bump)[1]
                - env.returns(mech, theta_p - bump)[1]
            ) / (2 * h)
            assert rel_error(grad[i], fd) < 1e-5


# -- inner loop ---------------------------------------------------------------------


def test_inner_loop_length_one_accumulates_single_return(rng):
    theta_m, theta_p0 = rng.normal(size=5), rng.normal(size=5)
    trace = training.run_inner_loop(PD_ENV, theta_m, theta_p0, 1, 10.0)
    mech = PD_ENV.mechanism_from_params(theta_m)
    r_m, _ = PD_ENV.returns(mech, theta_p0)
    assert trace.rbar_mechanism == pytest.approx(r_m, abs=1e-12)
    assert len(trace.thetas) == 2


def test_inner_loop_frozen_participant_with_zero_lr(rng):
    theta_m, theta_p0 = rng.normal(size=5), rng.normal(size=5)
    trace = training.run_inner_loop(PD_ENV, theta_m, theta_p0, 7, 0.0)
    mech = PD_ENV.mechanism_from_params(theta_m)
    r_m, _ = PD_ENV.returns(mech, theta_p0)
    assert trace.rbar_mechanism == pytest.approx(7 * r_m, abs=1e-10)
    for theta in trace.thetas:
        np.testing.assert_array_equal(theta, theta_p0)


def test_inner_loop_learns_best_response_to_alld(rng):
    # Against a pure defector only (s0, DC, DD) are ever visited, so those
    # cooperation probabilities collapse while the unreachable CC/CD logits
    # keep their init; the mechanism return settles at the punishment value.
    alld = np.full(5, -40.0)
    theta_p0 = rng.normal(size=5)
    trace = training.run_inner_loop(PD_ENV, alld, theta_p0, 50, 10.0)
    final_coop = dual.sigmoid(trace.thetas[-1])
    assert final_coop[0] < 0.1 and final_coop[3] < 0.15 and final_coop[4] < 0.05
    assert abs(dual.value_of(trace.returns_mechanism[-1]) - (-2.0)) < 0.1


def test_rbar_equals_sum_of_step_returns(rng):
    theta_m, theta_p0 = rng.normal(size=5), rng.normal(size=5)
    trace = training.run_inner_loop(PD_ENV, theta_m, theta_p0, 9, 10.0)
    assert trace.rbar_mechanism == pytest.approx(
        trace.mech_return_values().sum(), abs=1e-12
    )


# -- diff-md ------------------------------------------------------------------------


def test_diff_md_single_step_gradient_is_direct_gradient(rng):
    # with one inner step the participant update happens after the only return
    theta_m, theta_p0 = rng.normal(size=5), rng.normal(size=5)
    _, grad = training.inner_loop_mech_gradient(PD_ENV, theta_m, theta_p0, 1, 123.0)
    seeded = dual.seed(theta_m)
    r_m, _ = PD_ENV.returns(PD_ENV.mechanism_from_params(seeded), theta_p0)
    np.testing.assert_allclose(grad, r_m.tangent, atol=1e-14)


def test_diff_md_gradient_matches_fd_through_inner_loop(rng):
    theta_m, theta_p0 = rng.normal(size=5), rng.normal(size=5)
    _, grad = training.inner_loop_mech_gradient(PD_ENV, theta_m, theta_p0, 12, 10.0)
    h = 1e-5
    for i in range(5):
        bump = np.zeros(5)
        bump[i] = h

        def rbar(theta):
            trace = training.run_inner_loop(PD_ENV, theta, theta_p0, 12, 10.0)
            return float(trace.rbar_mechanism)

        fd = (rbar(theta_m + bump) - rbar(theta_m - bump)) / (2 * h)
        assert rel_error(grad[i], fd) < 1e-4


def test_diff_md_pgg_gradient_matches_fd(rng):
    env = pgg_env()
    theta_m = policies.MechanismNet.init(rng).flatten()
    theta_p0 = dual.sigmoid(rng.normal(size=4))
    _, grad = training.inner_loop_mech_gradient(env, theta_m, theta_p0, 4, 0.1)
    h = 1e-5
    for lane in rng.choice(theta_m.size, size=8, replace=False):
        bump = np.zeros_like(theta_m)
        bump[lane] = h

        def rbar(theta):
            trace = training.run_inner_loop(env, theta, theta_p0, 4, 0.1)
            return float(trace.rbar_mechanism)

        fd = (rbar(theta_m + bump) - rbar(theta_m - bump)) / (2 * h)
        assert rel_error(grad[lane], fd) < 1e-4


def test_zero_mech_lr_keeps_mechanism_fixed():
    cfg = small_cfg(mech_lr=1e-300)  # positive per contract; effectively zero
    rng = np.random.default_rng(0)
    theta0 = PD_ENV.init_mech_params(rng)
    theta, _ = training.diff_md_step(PD_ENV, theta0, cfg, rng)
    np.testing.assert_allclose(theta, theta0, atol=1e-290)


# -- es-md --------------------------------------------------------------------------


def test_es_zero_returns_zero_update():
    class NullEnv(training.MatrixGameEnv):
        def step(self, mechanism, theta_p, rng=None):
            r_m, r_p, grad = super().step(mechanism, theta_p, rng)
            return r_m * 0.0, r_p * 0.0, grad * 0.0

    env = NullEnv(PD_ENV.mdp)
    cfg = small_cfg(es_batch=16)
    rng = np.random.default_rng(5)
    theta0 = np.zeros(5)
    theta, mean_r = training.es_md_step(env, theta0, cfg, rng)
    np.testing.assert_array_equal(theta, theta0)
    assert mean_r == 0.0


def test_es_estimator_unbiased_for_linear_fitness(rng):
    # synthetic one-parameter fitness rbar(theta + eps) = c * eps, sigma = 1
    c = 1.7
    trials, batch = 10000, 8
    estimates = np.empty(trials)
    for trial in range(trials):
        eps = rng.normal(0.0, 1.0, size=batch)
        estimates[trial] = np.sum(eps * (c * eps)) / (batch * 1.0)
    stderr = estimates.std(ddof=1) / np.sqrt(trials)
    assert abs(estimates.mean() - c) < 3 * stderr


def test_es_update_negates_with_returns(rng):
    class NegatedEnv(training.MatrixGameEnv):
        def step(self, mechanism, theta_p, rng=None):
            r_m, r_p, grad = super().step(mechanism, theta_p, rng)
            return -r_m, r_p, grad

    cfg = small_cfg(es_batch=32, grad_clip=None)
    theta0 = np.zeros(5)
    plus, _ = training.es_md_step(PD_ENV, theta0, cfg, np.random.default_rng(9))
    minus, _ = training.es_md_step(
        NegatedEnv(PD_ENV.mdp), theta0, cfg, np.random.default_rng(9)
    )
    np.testing.assert_allclose(plus - theta0, -(minus - theta0), atol=1e-15)


def test_es_rejects_tiny_batch():
    with pytest.raises(ConfigError):
        training.es_md_step(
            PD_ENV, np.zeros(5), small_cfg(es_batch=1), np.random.default_rng(0)
        )


def test_es_direction_agrees_with_exact_gradient(rng):
    cfg = small_cfg(es_batch=256, inner_steps=10)
    agree = 0
    for _ in range(20):
        theta = rng.normal(size=5)
        estimate, _ = training.es_gradient_estimate(
            PD_ENV, theta, cfg, np.random.default_rng(rng.integers(2**31))
        )
        episode_rng = np.random.default_rng(4)
        _, theta_p0 = PD_ENV.sample_inner(episode_rng)
        _, exact = training.inner_loop_mech_gradient(PD_ENV, theta, theta_p0, 10, 10.0)
        cosine = estimate @ exact / (np.linalg.norm(estimate) * np.linalg.norm(exact))
        agree += cosine > 0
    assert agree >= 17


# -- lola ---------------------------------------------------------------------------


def test_lola_with_zero_lookahead_is_naive_gradient(rng):
    theta_m, theta_p = rng.normal(size=5), rng.normal(size=5)
    updated, _ = training.lola_step(PD_ENV, theta_m, theta_p, 0.1, 0.0)
    seeded = dual.seed(theta_m)
    r_m, _ = PD_ENV.returns(PD_ENV.mechanism_from_params(seeded), theta_p)
    naive = theta_m + 0.1 * r_m.tangent
    assert np.max(np.abs(updated - naive)) < 1e-12


def test_lola_lookahead_gradient_matches_fd(rng):
    theta_m, theta_p = rng.normal(size=5), rng.normal(size=5)
    part_lr = 10.0
    grad, _ = training.lola_lookahead_gradient(PD_ENV, theta_m, theta_p, part_lr)

    def lookahead_objective(tm):
        mech = PD_ENV.mechanism_from_params(tm)
        inner = training.participant_grad(PD_ENV, tm, theta_p)
        r_m, _ = PD_ENV.returns(mech, theta_p + part_lr * inner)
        return float(r_m)

    h = 1e-5
    for i in range(5):
        bump = np.zeros(5)
        bump[i] = h
        fd = (lookahead_objective(theta_m + bump) - lookahead_objective(theta_m - bump)) / (2 * h)
        assert rel_error(grad[i], fd) < 1e-4


# -- outer loop ---------------------------------------------------------------------


def test_run_inner_outer_single_step():
    cfg = small_cfg(outer_steps=1)
    result = training.run_inner_outer(PD_ENV, "diff-md", cfg)
    assert len(result.history) == 1
    assert result.params.shape == (5,)


def test_run_inner_outer_deterministic():
    for method in training.METHODS:
        cfg = small_cfg(outer_steps=2, es_batch=8)
        a = training.run_inner_outer(PD_ENV, method, cfg)
        b = training.run_inner_outer(PD_ENV, method, cfg)
        assert np.array_equal(a.params, b.params), method
        assert a.history == b.history, method


def test_run_inner_outer_rejects_unknown_method():
    with pytest.raises(ConfigError):
        training.run_inner_outer(PD_ENV, "sgd", small_cfg())


def test_divergence_guard_triggers():
    class ExplodingEnv(training.MatrixGameEnv):
        def init_mech_params(self, rng=None):
            return np.full(5, 1e7)

    with pytest.raises(NumericalError):
        training.run_inner_outer(ExplodingEnv(PD_ENV.mdp), "diff-md", small_cfg(outer_steps=1))


def test_history_finite_for_all_games_and_pgg():
    for spec in games.enumerate_games():
        env = training.MatrixGameEnv(games.MatrixGameMDP(spec))
        cfg = small_cfg(outer_steps=2)
        result = training.run_inner_outer(env, "diff-md", cfg)
        assert np.all(np.isfinite(result.history)), spec.name
    env = training.PggEnv(resample_endowments=True)
    cfg = training.pgg_defaults(outer_steps=2, inner_steps=3, seed=1)
    result = training.run_inner_outer(env, "diff-md", cfg)
    assert np.all(np.isfinite(result.history))


def test_make_env_descriptors():
    from shepherd.errors import DomainError

    assert training.make_env("pgg").kind == "pgg"
    assert training.make_env("game:Chicken").mdp.spec.name == "Chicken"
    with pytest.raises(DomainError, match="PrisonersDilemma"):
        training.make_env("game:Nonexistent")  # message lists the valid names
    with pytest.raises(ConfigError):
        training.make_env("maze")
