import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from shepherd import dual, games, policies
from shepherd.errors import DomainError

from conftest import central_difference, rel_error

SPEC = games.PggSpec()

rho4 = hnp.arrays(
    np.float64,
    (4,),
    elements=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
)
endow4 = hnp.arrays(
    np.float64,
    (4,),
    elements=st.floats(min_value=0.2, max_value=1.0, allow_nan=False),
)


def test_coop_probs_at_zero_logits():
    np.testing.assert_allclose(
        policies.coop_probs(np.zeros(5)), np.full(5, 0.5)
    )


def test_coop_probs_saturate():
    np.testing.assert_allclose(policies.coop_probs(np.full(5, 40.0)), 1.0, atol=1e-9)


def test_coop_probs_half_logit():
    # sigmoid(0.5) = 1 / (1 + e^-0.5)
    expected = 1.0 / (1.0 + np.exp(-0.5))
    assert expected == pytest.approx(0.62246, abs=1e-5)
    np.testing.assert_allclose(policies.coop_probs(np.full(5, 0.5)), expected)


def test_one_memory_policy_validates():
    with pytest.raises(DomainError):
        policies.OneMemoryPolicy(np.zeros(4))
    with pytest.raises(DomainError):
        policies.OneMemoryPolicy(np.array([np.inf, 0, 0, 0, 0]))


def test_fixed_strategy_tables():
    assert policies.FixedStrategy("TitForTat").coop == (1, 1, 0, 1, 0)
    assert policies.FixedStrategy("AllD").coop == (0, 0, 0, 0, 0)
    assert policies.FixedStrategy("AllC").coop == (1, 1, 1, 1, 1)
    assert policies.FixedStrategy("WinStayLoseShift").coop == (1, 1, 0, 0, 1)
    assert policies.FixedStrategy("Selfish").name == "AllD"
    with pytest.raises(DomainError):
        policies.FixedStrategy("Nonexistent")


def test_tft_vs_alld_absorbs_into_dd():
    tft = policies.FixedStrategy("TitForTat").coop_probs()
    alld = policies.FixedStrategy("AllD").coop_probs()
    kernel = games.transition_kernel(tft, alld)
    # from the start: TFT cooperates, defector defects -> CD; then DD forever
    state = np.zeros(5)
    state[0] = 1.0
    state = state @ kernel
    np.testing.assert_array_equal(state, [0, 0, 1, 0, 0])
    state = state @ kernel
    np.testing.assert_array_equal(state, [0, 0, 0, 0, 1])
    state = state @ kernel
    np.testing.assert_array_equal(state, [0, 0, 0, 0, 1])


# -- mechanism net ---------------------------------------------------------------


def zero_net():
    return policies.MechanismNet(
        np.zeros((8, 32)), np.zeros(32), np.zeros((32, 4)), np.zeros(4)
    )


def test_zero_contributions_pay_nothing(rng):
    net = policies.MechanismNet.init(rng)
    payouts = policies.mechanism_payouts(net, SPEC, np.zeros(4))
    np.testing.assert_allclose(payouts, 0.0, atol=1e-12)


def test_zero_net_pays_uniform_shares():
    payouts = policies.mechanism_payouts(zero_net(), SPEC, np.ones(4))
    np.testing.assert_allclose(payouts, 0.88)


@given(rho4)
@settings(max_examples=25)
def test_net_payouts_conserve_pool(rho):
    net = policies.MechanismNet.init(np.random.default_rng(7))
    payouts = policies.mechanism_payouts(net, SPEC, rho)
    pool = SPEC.growth * (rho * SPEC.endowment_array).sum()
    assert abs(payouts.sum() - pool) < 1e-9
    assert np.all(payouts >= 0)


def test_net_flat_round_trip(rng):
    net = policies.MechanismNet.init(rng)
    rebuilt = policies.MechanismNet.from_flat(net.flatten())
    for a, b in zip(net.arrays(), rebuilt.arrays()):
        np.testing.assert_array_equal(a, b)


def test_net_payout_gradients_match_finite_differences(rng):
    net = policies.MechanismNet.init(rng)
    flat = net.flatten()
    rho = rng.uniform(0.2, 0.8, size=4)

    seeded = policies.MechanismNet.from_flat(dual.seed(flat))
    payout0 = policies.mechanism_payouts(seeded, SPEC, rho)[0]
    lanes = rng.choice(flat.size, size=12, replace=False)
    h = 1e-6
    for lane in lanes:
        bump = np.zeros_like(flat)
        bump[lane] = h
        up = policies.mechanism_payouts(policies.MechanismNet.from_flat(flat + bump), SPEC, rho)[0]
        dn = policies.mechanism_payouts(policies.MechanismNet.from_flat(flat - bump), SPEC, rho)[0]
        fd = (up - dn) / (2 * h)
        assert rel_error(payout0.tangent[lane], fd) < 1e-5

    # gradient w.r.t. the contribution fractions
    rho_d = dual.seed(rho)
    payouts = policies.mechanism_payouts(net, SPEC, rho_d)
    for i in range(4):
        fd = central_difference(
            lambda r: policies.mechanism_payouts(net, SPEC, r)[i], rho
        )
        assert rel_error(payouts.tangent[i], fd) < 1e-5


# -- baselines -------------------------------------------------------------------


def test_uniform_baseline_splits_equally():
    payouts = policies.baseline_redistribution("Uniform", SPEC, np.ones(4))
    np.testing.assert_allclose(payouts, 0.88)


def test_absolute_proportional_sole_contributor():
    payouts = policies.baseline_redistribution(
        "AbsoluteProportional", SPEC, np.array([1.0, 0, 0, 0])
    )
    np.testing.assert_allclose(payouts, [1.6, 0, 0, 0])


def test_relative_proportional_equal_fractions():
    # pool = 1.6 * 0.5 * 2.2 = 1.76, equal rho -> equal quarters of 1.76
    payouts = policies.baseline_redistribution(
        "RelativeProportional", SPEC, np.full(4, 0.5)
    )
    np.testing.assert_allclose(payouts, 0.44)


def test_random_baseline_requires_rng():
    with pytest.raises(DomainError):
        policies.baseline_redistribution("Random", SPEC, np.ones(4))


def test_unknown_baseline_rejected():
    with pytest.raises(DomainError):
        policies.baseline_redistribution("Lottery", SPEC, np.ones(4))


@given(rho4, endow4)
@settings(max_examples=50)
def test_all_baselines_conserve_and_stay_nonnegative(rho, endowments):
    spec = games.PggSpec(endowments=tuple(endowments))
    rng = np.random.default_rng(3)
    pool = spec.growth * (rho * spec.endowment_array).sum()
    for kind in policies.BASELINE_KINDS:
        payouts = policies.baseline_redistribution(kind, spec, rho, rng=rng)
        assert abs(payouts.sum() - pool) < 1e-9, kind
        assert np.all(payouts >= 0), kind


@given(rho4)
@settings(max_examples=50)
def test_absolute_equals_relative_for_equal_endowments(rho):
    spec = games.PggSpec(endowments=(0.7, 0.7, 0.7, 0.7))
    absolute = policies.baseline_redistribution("AbsoluteProportional", spec, rho)
    relative = policies.baseline_redistribution("RelativeProportional", spec, rho)
    np.testing.assert_allclose(absolute, relative, atol=1e-12)


def test_degenerate_zero_contributions_fall_back_to_uniform():
    shares_abs = policies.baseline_redistribution("AbsoluteProportional", SPEC, np.zeros(4))
    np.testing.assert_allclose(shares_abs, 0.0)  # pool is empty, payouts zero
    shares, grads = policies.BaselineMechanism("AbsoluteProportional").shares_and_own_grads(
        SPEC.endowment_array, SPEC.growth, np.zeros(4)
    )
    np.testing.assert_allclose(shares, 0.25)
    np.testing.assert_allclose(grads, 0.0)


def test_baseline_own_share_grads_match_finite_differences(rng):
    rho = rng.uniform(0.1, 0.9, size=4)
    e = SPEC.endowment_array
    for kind in ("AbsoluteProportional", "RelativeProportional", "Uniform"):
        mech = policies.BaselineMechanism(kind)
        shares, grads = mech.shares_and_own_grads(e, SPEC.growth, rho)
        h = 1e-6
        for i in range(4):
            bump = np.zeros(4)
            bump[i] = h
            up, _ = mech.shares_and_own_grads(e, SPEC.growth, rho + bump)
            dn, _ = mech.shares_and_own_grads(e, SPEC.growth, rho - bump)
            fd = (up[i] - dn[i]) / (2 * h)
            assert rel_error(grads[i], fd) < 1e-5, kind
