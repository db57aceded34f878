"""Inner-outer loop training for mechanism agents.

The inner loop lets participant agents improve by plain gradient ascent
against a frozen mechanism; the outer loop updates the mechanism from the
return accumulated over that learning trace. Three mechanism updates are
provided: a meta-gradient through the fully unrolled inner loop (diff-md),
a black-box perturbation estimator (es-md), and a one-step
opponent-learning lookahead (lola).

Participant gradients are explicit closed-form expressions built from
dual-aware kernels, so a single level of forward-mode differentiation over
mechanism parameters covers the whole unrolled computation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import dual, games, policies
from .errors import ConfigError, NumericalError

METHODS = ("diff-md", "es-md", "lola")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the inner-outer loop."""

    outer_steps: int = 10000  # mechanism updates
    inner_steps: int = 50  # participant updates per episode
    mech_lr: float = 0.1
    part_lr: float = 10.0
    es_batch: int = 256
    es_sigma: float = 1.0
    init_scale: float = 1.0  # stddev of the participant-parameter initializer
    seed: int = 0
    antithetic: bool = False  # ES variance-reduction options; off by default
    fitness_shaping: bool = False
    grad_clip: float | None = 10.0  # global-norm cap on the outer update
    outer_optimizer: str = "sgd"  # "sgd" (plain ascent) or "adam"
    grad_batch: int = 1  # diff-md: fresh inner loops averaged per update
    param_limit: float = 1e6

    def __post_init__(self):
        if min(self.outer_steps, self.inner_steps, self.es_batch, self.grad_batch) < 1:
            raise ConfigError("step counts and batch sizes must be >= 1")
        if min(self.mech_lr, self.part_lr, self.es_sigma) <= 0.0:
            raise ConfigError("learning rates and es_sigma must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0.0:
            raise ConfigError("grad_clip must be positive or None")
        if self.outer_optimizer not in ("sgd", "adam"):
            raise ConfigError("outer_optimizer must be 'sgd' or 'adam'")


def matrix_defaults(**overrides) -> TrainConfig:
    return replace(TrainConfig(), **overrides)


def pgg_defaults(**overrides) -> TrainConfig:
    # Adam plus a small gradient batch: the shepherding signal through ten
    # small participant steps is noisy and coordinate scales in the MLP vary
    # widely, so plain single-draw ascent barely moves in 5000 updates.
    base = TrainConfig(
        outer_steps=5000,
        inner_steps=10,
        mech_lr=0.01,
        part_lr=0.1,
        outer_optimizer="adam",
        grad_batch=4,
    )
    return replace(base, **overrides)


# -- environments ---------------------------------------------------------------


class MatrixGameEnv:
    """An iterated matrix game; mechanism parameters are 5 policy logits."""

    kind = "matrix_game"
    n_part_params = 5

    def __init__(self, mdp: games.MatrixGameMDP):
        self.mdp = mdp

    @property
    def n_mech_params(self) -> int:
        return 5

    def init_mech_params(self, rng=None) -> np.ndarray:
        # logits 0 <=> cooperation probability 0.5 in every state
        return np.zeros(5)

    def mechanism_from_params(self, params) -> policies.MatrixMechanism:
        return policies.MatrixMechanism.from_logits(params)

    def sample_inner(self, rng, size=None, scale=1.0):
        shape = (5,) if size is None else (size, 5)
        return self, rng.normal(0.0, scale, size=shape)

    def project_participant(self, theta_p):
        return theta_p  # logits are unconstrained

    def returns(self, mechanism, theta_p, rng=None):
        return games.returns_from_probs(
            self.mdp, mechanism.coop, dual.sigmoid(theta_p)
        )

    def step(self, mechanism, theta_p, rng=None):
        """One episode: (R_m, R_p, dR_p/d theta_p) against this mechanism."""
        return games.matrix_returns_and_participant_grad(
            self.mdp, mechanism.coop, theta_p
        )


class PggEnv:
    """The resource-allocation game; mechanism parameters are the MLP weights.

    Participants carry their propensity directly (theta_p IS rho) and learn
    by gradient ascent projected onto [0, 1]; their initial propensities are
    drawn as sigmoid(Normal(0, scale)). Set ``squash_propensities`` to store
    participants as logits with a sigmoid squashing instead (slower learning
    at the same rates, since every step picks up a sigmoid-slope factor).

    ``endowments`` may carry a leading batch axis (used when evaluating an
    ES batch in one pass). With ``resample_endowments`` set, each inner-loop
    reset draws fresh endowments uniformly from the configured range.
    """

    kind = "pgg"
    n_part_params = 4

    def __init__(
        self,
        spec: games.PggSpec | None = None,
        endowments=None,
        resample_endowments: bool = False,
        endowment_range: tuple[float, float] = (0.2, 1.0),
        squash_propensities: bool = False,
    ):
        self.spec = spec if spec is not None else games.PggSpec()
        self.endowments = np.asarray(
            self.spec.endowment_array if endowments is None else endowments, dtype=float
        )
        self.resample_endowments = resample_endowments
        self.endowment_range = endowment_range
        self.squash_propensities = squash_propensities

    @property
    def growth(self) -> float:
        return self.spec.growth

    @property
    def n_mech_params(self) -> int:
        return policies.MechanismNet.n_params()

    def init_mech_params(self, rng) -> np.ndarray:
        return policies.MechanismNet.init(rng).flatten()

    def mechanism_from_params(self, params) -> policies.NetMechanism:
        return policies.NetMechanism(policies.MechanismNet.from_flat(params))

    def _replace(self, **kwargs):
        merged = dict(
            spec=self.spec,
            endowments=self.endowments,
            resample_endowments=self.resample_endowments,
            endowment_range=self.endowment_range,
            squash_propensities=self.squash_propensities,
        )
        merged.update(kwargs)
        return PggEnv(**merged)

    def sample_inner(self, rng, size=None, scale=1.0):
        shape = (4,) if size is None else (size, 4)
        env = self
        if self.resample_endowments:
            lo, hi = self.endowment_range
            env = self._replace(
                endowments=rng.uniform(lo, hi, size=shape),
                resample_endowments=False,
            )
        draw = rng.normal(0.0, scale, size=shape)
        theta_p0 = draw if self.squash_propensities else dual.sigmoid(draw)
        return env, theta_p0

    def project_participant(self, theta_p):
        if self.squash_propensities:
            return theta_p
        return dual.clip01(theta_p)

    def _propensity(self, theta_p):
        if self.squash_propensities:
            return dual.sigmoid(theta_p)
        return dual.clip01(theta_p)

    def _forward(self, mechanism, theta_p, rng):
        rho = self._propensity(theta_p)
        e = self.endowments
        pool_grown = self.growth * dual.total(rho * e, axis=-1)
        shares, ds_own = mechanism.shares_and_own_grads(e, self.growth, rho, rng)
        payouts = shares * dual.expand_last(pool_grown)
        returns_p = payouts + (1.0 - rho) * e
        return rho, e, pool_grown, shares, ds_own, payouts, returns_p

    def returns(self, mechanism, theta_p, rng=None):
        *_, returns_p = self._forward(mechanism, theta_p, rng)
        return dual.mean(returns_p, axis=-1), returns_p

    def step(self, mechanism, theta_p, rng=None):
        """One round: welfare, participant returns, and each participant's
        gradient of its own return with respect to its own parameter."""
        rho, e, pool_grown, shares, ds_own, payouts, returns_p = self._forward(
            mechanism, theta_p, rng
        )
        dp_own = ds_own * dual.expand_last(pool_grown) + shares * (self.growth * e)
        grad = dp_own - e
        if self.squash_propensities:
            grad = grad * rho * (1.0 - rho)
        return dual.mean(returns_p, axis=-1), returns_p, grad


def make_env(name: str, discount: float = games.DEFAULT_DISCOUNT, **pgg_kwargs):
    """Build an environment from a descriptor: 'pgg' or 'game:<Name>'."""
    if name == "pgg":
        return PggEnv(**pgg_kwargs)
    if name.startswith("game:"):
        spec = games.game_by_name(name.split(":", 1)[1])
        return MatrixGameEnv(games.MatrixGameMDP(spec, discount=discount))
    raise ConfigError(f"unknown environment {name!r}; expected 'pgg' or 'game:<Name>'")


# -- the inner loop -------------------------------------------------------------


@dataclass
class InnerLoopTrace:
    """One participant-learning episode against a frozen mechanism.

    Returns are recorded before each participant update, so
    ``returns_mechanism[t]`` is the mechanism return at ``thetas[t]`` and
    ``rbar_mechanism`` is their plain (unweighted) sum.
    """

    thetas: list
    returns_mechanism: list
    returns_participant: list
    rbar_mechanism: object

    def mech_return_values(self) -> np.ndarray:
        return np.asarray([dual.value_of(r) for r in self.returns_mechanism])


def _as_mechanism(env, mechanism):
    if isinstance(mechanism, (np.ndarray, dual.Dual)):
        return env.mechanism_from_params(mechanism)
    return mechanism


def participant_grad(env, mechanism, theta_p, rng=None):
    """Gradient of the participant return with respect to its own parameters."""
    return env.step(_as_mechanism(env, mechanism), theta_p, rng)[2]


def run_inner_loop(env, mechanism, theta_p0, inner_steps, part_lr, rng=None):
    """Run ``inner_steps`` of participant gradient ascent; mechanism frozen.

    Updates are projected through ``env.project_participant`` (identity for
    logit-parameterized participants, a [0, 1] projection for literal
    propensities).
    """
    mechanism = _as_mechanism(env, mechanism)
    theta_p = theta_p0
    thetas = [theta_p]
    returns_m, returns_p = [], []
    rbar = None
    for _ in range(inner_steps):
        r_m, r_p, grad = env.step(mechanism, theta_p, rng)
        returns_m.append(r_m)
        returns_p.append(r_p)
        rbar = r_m if rbar is None else rbar + r_m
        theta_p = env.project_participant(theta_p + part_lr * grad)
        thetas.append(theta_p)
    return InnerLoopTrace(thetas, returns_m, returns_p, rbar)


# -- mechanism updates ----------------------------------------------------------


def inner_loop_mech_gradient(env, theta_m, theta_p0, inner_steps, part_lr):
    """Accumulated return and its exact gradient w.r.t. mechanism parameters.

    Seeds one tangent lane per mechanism parameter and replays the entire
    inner loop in dual arithmetic, participant updates included.
    """
    seeded = dual.seed(theta_m)
    trace = run_inner_loop(env, seeded, theta_p0, inner_steps, part_lr)
    rbar = trace.rbar_mechanism
    return rbar.value, rbar.tangent


def clip_gradient(grad, max_norm):
    """Rescale to the given global norm when exceeded (None leaves it alone).

    Gradients through tens of unrolled ascent steps occasionally spike by
    orders of magnitude; without a cap a single spike throws the squashed
    policies into saturation, where sigmoid gradients vanish and training
    freezes.
    """
    if max_norm is None:
        return grad
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


class SgdAscent:
    """Plain ascent: delta = lr * clipped gradient."""

    def __init__(self, lr, grad_clip=None):
        self.lr = lr
        self.grad_clip = grad_clip

    def update(self, grad):
        return self.lr * clip_gradient(grad, self.grad_clip)


class AdamAscent:
    """Adam-scaled ascent (maximization sign convention)."""

    def __init__(self, n_params, lr, grad_clip=None, beta1=0.9, beta2=0.99, eps=1e-4):
        self.lr = lr
        self.grad_clip = grad_clip
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def update(self, grad):
        grad = clip_gradient(grad, self.grad_clip)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(config: TrainConfig, n_params: int):
    if config.outer_optimizer == "adam":
        return AdamAscent(n_params, config.mech_lr, grad_clip=config.grad_clip)
    return SgdAscent(config.mech_lr, grad_clip=config.grad_clip)


def diff_md_step(env, theta_m, config: TrainConfig, rng, optimizer=None):
    """One differentiable mechanism update (meta-gradient ascent).

    Averages the exact unrolled gradient over ``config.grad_batch`` fresh
    participant draws, then ascends. Stateful optimizers are threaded
    through by the outer loop; standalone calls default to plain ascent.
    """
    if optimizer is None:
        optimizer = SgdAscent(config.mech_lr, grad_clip=config.grad_clip)
    grad_sum = np.zeros_like(theta_m)
    return_sum = 0.0
    for _ in range(config.grad_batch):
        episode_env, theta_p0 = env.sample_inner(rng, scale=config.init_scale)
        rbar_value, grad = inner_loop_mech_gradient(
            episode_env, theta_m, theta_p0, config.inner_steps, config.part_lr
        )
        grad_sum += grad
        return_sum += float(rbar_value)
    updated = theta_m + optimizer.update(grad_sum / config.grad_batch)
    return updated, return_sum / (config.grad_batch * config.inner_steps)


def _shaped_fitness(rbar: np.ndarray) -> np.ndarray:
    """Centered rank transform in [-0.5, 0.5] (optional ES shaping)."""
    order = np.argsort(np.argsort(rbar))
    return order / (len(rbar) - 1.0) - 0.5


def es_gradient_estimate(env, theta_m, config: TrainConfig, rng):
    """The perturbation estimator ``sum_p eps_p * rbar_p / (N_p * sigma)``.

    Perturbations are drawn first, then per-member participant inits (and
    endowments, where applicable); the reduction sums in perturbation-index
    order. Returns the raw estimate and the batch of accumulated returns.
    """
    n, sigma = config.es_batch, config.es_sigma
    if n < 2:
        raise ConfigError("es_batch must be at least 2")
    eps = rng.normal(0.0, sigma, size=(n, theta_m.shape[-1]))
    if config.antithetic:
        eps[n // 2 :] = -eps[: n - n // 2]
    episode_env, theta_p0 = env.sample_inner(rng, size=n, scale=config.init_scale)
    trace = run_inner_loop(
        episode_env, theta_m + eps, theta_p0, config.inner_steps, config.part_lr
    )
    rbar = np.asarray(trace.rbar_mechanism, dtype=float)
    fitness = _shaped_fitness(rbar) if config.fitness_shaping else rbar
    return eps.T @ fitness / (n * sigma), rbar


def es_md_step(env, theta_m, config: TrainConfig, rng, optimizer=None):
    """One evolution-strategies update from a batch of perturbed inner loops."""
    if optimizer is None:
        optimizer = SgdAscent(config.mech_lr, grad_clip=config.grad_clip)
    grad_estimate, rbar = es_gradient_estimate(env, theta_m, config, rng)
    updated = theta_m + optimizer.update(grad_estimate)
    return updated, float(rbar.mean()) / config.inner_steps


def lola_lookahead_gradient(env, theta_m, theta_p, part_lr, rng=None):
    """Gradient of ``R_m(theta_m, theta_p + part_lr * dR_p/d theta_p)``.

    The projected participant step's dependence on the mechanism parameters
    is included (exact gradient, second-order term and all).
    """
    seeded = dual.seed(theta_m)
    mechanism = env.mechanism_from_params(seeded)
    _, _, part_grad = env.step(mechanism, theta_p, rng)
    lookahead_p = theta_p + part_lr * part_grad
    r_m_look, _ = env.returns(mechanism, lookahead_p, rng)
    return r_m_look.tangent, float(np.asarray(r_m_look.value))


def lola_step(env, theta_m, theta_p, mech_lr, part_lr, rng=None, grad_clip=None):
    """One learning-aware mechanism update; the participant itself stays naive."""
    grad, r_m_look = lola_lookahead_gradient(env, theta_m, theta_p, part_lr, rng)
    updated = theta_m + mech_lr * clip_gradient(grad, grad_clip)
    return updated, r_m_look


def _lola_episode(env, theta_m, config: TrainConfig, rng, optimizer=None):
    """Simultaneous co-learning for one episode; only the mechanism looks ahead."""
    episode_env, theta_p = env.sample_inner(rng, scale=config.init_scale)
    rbar = 0.0
    for _ in range(config.inner_steps):
        r_m, _, part_grad = episode_env.step(
            episode_env.mechanism_from_params(theta_m), theta_p, rng
        )
        rbar += float(r_m)
        if optimizer is None:
            updated_m, _ = lola_step(
                episode_env,
                theta_m,
                theta_p,
                config.mech_lr,
                config.part_lr,
                rng,
                grad_clip=config.grad_clip,
            )
        else:
            grad, _ = lola_lookahead_gradient(
                episode_env, theta_m, theta_p, config.part_lr, rng
            )
            updated_m = theta_m + optimizer.update(grad)
        theta_p = episode_env.project_participant(theta_p + config.part_lr * part_grad)
        theta_m = updated_m
    return theta_m, rbar / config.inner_steps


# -- the outer loop -------------------------------------------------------------


@dataclass
class TrainResult:
    params: np.ndarray
    history: list[float]  # mean inner return per outer step
    method: str
    config: TrainConfig


def _check_parameters(theta, step, limit):
    if not np.all(np.isfinite(theta)):
        raise NumericalError(f"non-finite mechanism parameters at outer step {step}")
    magnitude = float(np.max(np.abs(theta)))
    if magnitude > limit:
        raise NumericalError(
            f"mechanism parameter magnitude {magnitude:.3e} exceeds {limit:.1e} "
            f"at outer step {step}"
        )


def run_inner_outer(env, method: str, config: TrainConfig) -> TrainResult:
    """Algorithm body: ``outer_steps`` mechanism updates, fresh participants
    drawn each episode; deterministic given the config seed."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    rng = np.random.default_rng(config.seed)
    theta = env.init_mech_params(rng)
    optimizer = make_optimizer(config, theta.size)
    history = []
    for step in range(config.outer_steps):
        if method == "diff-md":
            theta, mean_return = diff_md_step(env, theta, config, rng, optimizer)
        elif method == "es-md":
            theta, mean_return = es_md_step(env, theta, config, rng, optimizer)
        else:
            theta, mean_return = _lola_episode(env, theta, config, rng, optimizer)
        _check_parameters(theta, step, config.param_limit)
        history.append(mean_return)
    return TrainResult(params=theta, history=history, method=method, config=config)
