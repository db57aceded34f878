"""Policy representations for both environments.

Matrix-game players are one-memory policies stored as unconstrained logits;
the cooperation probability per state is the sigmoid of the logit, which
keeps plain gradient ascent well-defined at any learning rate. The
resource-allocation mechanism is a small MLP that emits softmax payout
shares (conserving the grown pool by construction); participants there are
single squashed propensity scalars. The four redistribution baselines from
the economics literature are provided both as functions and as mechanism
objects usable by the evaluation harness and the play service.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dual
from .errors import DomainError
from .games import PggSpec

STATE_ORDER = ("s0", "CC", "CD", "DC", "DD")


@dataclass(frozen=True)
class OneMemoryPolicy:
    """Five unconstrained logits, index-aligned to (s0, CC, CD, DC, DD)."""

    params: np.ndarray

    def __post_init__(self):
        params = np.asarray(self.params, dtype=float)
        if params.shape != (5,):
            raise DomainError("one-memory policies have exactly 5 parameters")
        if not np.all(np.isfinite(params)):
            raise DomainError("policy parameters must be finite")
        object.__setattr__(self, "params", params)

    def coop_probs(self) -> np.ndarray:
        return dual.sigmoid(self.params)


def coop_probs(policy) -> np.ndarray:
    """Cooperation probabilities of a logit policy (vector or OneMemoryPolicy)."""
    params = getattr(policy, "params", policy)
    return dual.sigmoid(params)


# Fixed one-memory strategies, as cooperation probabilities per state.
# First letter of a state is the strategy owner's own previous action.
FIXED_STRATEGIES: dict[str, tuple[float, ...]] = {
    "AllC": (1, 1, 1, 1, 1),
    "AllD": (0, 0, 0, 0, 0),
    "TitForTat": (1, 1, 0, 1, 0),
    "WinStayLoseShift": (1, 1, 0, 0, 1),
    "Grim": (1, 1, 0, 0, 0),
}

_STRATEGY_ALIASES = {
    "Selfish": "AllD",
    "TFT": "TitForTat",
    "WSLS": "WinStayLoseShift",
}


def is_fixed_strategy_name(name: str) -> bool:
    return name in FIXED_STRATEGIES or name in _STRATEGY_ALIASES


@dataclass(frozen=True)
class FixedStrategy:
    """A named deterministic one-memory strategy."""

    name: str
    coop: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        name = _STRATEGY_ALIASES.get(self.name, self.name)
        if name not in FIXED_STRATEGIES:
            known = ", ".join(sorted(FIXED_STRATEGIES))
            raise DomainError(f"unknown strategy {self.name!r}; known: {known}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "coop", FIXED_STRATEGIES[name])

    def coop_probs(self) -> np.ndarray:
        return np.asarray(self.coop, dtype=float)


# -- resource-allocation mechanism policies ------------------------------------


@dataclass
class MechanismNet:
    """Redistribution policy: 8 inputs -> 32 tanh units -> 4 softmax shares.

    Input is the four endowments concatenated with the four contributions
    ``rho_i * e_i``; the softmax head guarantees the payouts are a convex
    split of the grown pool.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    HIDDEN = 32
    SHAPES = ((8, 32), (32,), (32, 4), (4,))

    def __post_init__(self):
        for name, arr, shape in zip(("w1", "b1", "w2", "b2"), self.arrays(), self.SHAPES):
            if dual.value_of(arr).shape[-len(shape):] != shape:
                raise DomainError(f"{name} must have trailing shape {shape}")

    def arrays(self):
        return (self.w1, self.b1, self.w2, self.b2)

    @classmethod
    def n_params(cls) -> int:
        return int(sum(np.prod(s) for s in cls.SHAPES))

    @classmethod
    def init(cls, rng: np.random.Generator) -> "MechanismNet":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
        bound1 = 1.0 / np.sqrt(8.0)
        bound2 = 1.0 / np.sqrt(32.0)
        return cls(
            w1=rng.uniform(-bound1, bound1, size=(8, 32)),
            b1=rng.uniform(-bound1, bound1, size=32),
            w2=rng.uniform(-bound2, bound2, size=(32, 4)),
            b2=rng.uniform(-bound2, bound2, size=4),
        )

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.ravel(a) for a in self.arrays()])

    @classmethod
    def from_flat(cls, flat) -> "MechanismNet":
        """Rebuild from a flat parameter vector (plain or dual, batched)."""
        pieces = []
        offset = 0
        for shape in cls.SHAPES:
            size = int(np.prod(shape))
            chunk = flat[..., offset : offset + size]
            lead = dual.value_of(chunk).shape[:-1]
            pieces.append(chunk.reshape(lead + shape))
            offset += size
        return cls(*pieces)

    def forward_shares(self, endowments, contributions):
        """Softmax payout shares from (endowments ++ contributions)."""
        x = dual.concatenate(
            [_match_leading(endowments, contributions), contributions], axis=-1
        )
        z = dual.tanh(dual.vecmat(x, self.w1) + self.b1)
        h = dual.vecmat(z, self.w2) + self.b2
        return dual.softmax(h), z


def _match_leading(endowments, contributions):
    """Broadcast plain endowments against the contributions' leading axes."""
    if isinstance(endowments, dual.Dual) or isinstance(contributions, dual.Dual):
        if not isinstance(endowments, dual.Dual):
            target = dual.value_of(contributions).shape
            return np.broadcast_to(np.asarray(endowments, float), target)
        return endowments
    return np.broadcast_to(
        np.asarray(endowments, float), np.asarray(contributions).shape
    )


def mechanism_payouts(net: MechanismNet, spec: PggSpec, rho):
    """Payouts = shares * growth * sum(rho * e); conserving by construction."""
    return NetMechanism(net).payouts(spec.endowment_array, spec.growth, rho)


@dataclass(frozen=True)
class PggParticipantPolicy:
    """A single unconstrained propensity parameter; rho = sigmoid(param)."""

    param: float

    def propensity(self) -> float:
        return float(dual.sigmoid(np.asarray(self.param, dtype=float)))


# -- redistribution rules ------------------------------------------------------

BASELINE_KINDS = ("AbsoluteProportional", "RelativeProportional", "Uniform", "Random")


def _normalized_shares(weights):
    """weights / sum(weights), falling back to the uniform split at zero."""
    weights = np.asarray(weights, dtype=float)
    totals = weights.sum(axis=-1, keepdims=True)
    uniform = np.full_like(weights, 0.25)
    with np.errstate(invalid="ignore", divide="ignore"):
        shares = np.where(totals > 0.0, weights / np.where(totals == 0, 1.0, totals), uniform)
    return shares


def baseline_redistribution(kind: str, spec: PggSpec, rho, rng=None) -> np.ndarray:
    """Payouts under one of the four baseline rules.

    Shares are proportional to the absolute contribution ``rho*e``
    (AbsoluteProportional), to the contributed fraction ``rho``
    (RelativeProportional), equal (Uniform), or a flat-Dirichlet draw
    (Random, which requires ``rng``). Degenerate all-zero weights fall back
    to the uniform split.
    """
    rho = np.asarray(rho, dtype=float)
    e = spec.endowment_array
    if kind == "AbsoluteProportional":
        shares = _normalized_shares(rho * e)
    elif kind == "RelativeProportional":
        shares = _normalized_shares(rho)
    elif kind == "Uniform":
        shares = np.full_like(rho, 0.25)
    elif kind == "Random":
        if rng is None:
            raise DomainError("Random redistribution requires an explicit rng")
        shares = rng.dirichlet(np.ones(spec.n_participants))
    else:
        raise DomainError(f"unknown redistribution kind {kind!r}; known: {BASELINE_KINDS}")
    pool = spec.growth * (rho * e).sum(axis=-1, keepdims=True)
    return shares * pool


# -- mechanism objects for the inner loop --------------------------------------


class BaselineMechanism:
    """One of the fixed redistribution rules, as an inner-loop mechanism.

    ``endowments`` and ``rho`` are 4-vectors with optional leading batch
    axes; ``shares_and_own_grads`` additionally reports d shares_i / d rho_i
    per participant (zero for the Uniform and Random rules, whose shares do
    not depend on the contributions).
    """

    def __init__(self, kind: str):
        if kind not in BASELINE_KINDS:
            raise DomainError(f"unknown redistribution kind {kind!r}; known: {BASELINE_KINDS}")
        self.kind = kind
        self.label = kind

    def shares_and_own_grads(self, endowments, growth, rho, rng=None):
        rho = np.asarray(rho, dtype=float)
        e = np.asarray(endowments, dtype=float)
        if self.kind == "Random":
            if rng is None:
                raise DomainError("Random redistribution requires an explicit rng")
            return rng.dirichlet(np.ones(rho.shape[-1])), np.zeros_like(rho)
        if self.kind == "Uniform":
            return np.full_like(rho, 1.0 / rho.shape[-1]), np.zeros_like(rho)
        weights = rho * e if self.kind == "AbsoluteProportional" else rho
        scale = e if self.kind == "AbsoluteProportional" else 1.0
        totals = weights.sum(axis=-1, keepdims=True)
        shares = _normalized_shares(weights)
        safe = np.where(totals == 0.0, 1.0, totals)
        grads = np.where(totals > 0.0, scale * (totals - weights) / safe**2, 0.0)
        return shares, grads

    def payouts(self, endowments, growth, rho, rng=None) -> np.ndarray:
        shares, _ = self.shares_and_own_grads(endowments, growth, rho, rng)
        e = np.asarray(endowments, dtype=float)
        pool = growth * (np.asarray(rho) * e).sum(axis=-1, keepdims=True)
        return shares * pool


class NetMechanism:
    """A MechanismNet bound as an inner-loop mechanism (plain or dual params)."""

    label = "IO-Loop"

    def __init__(self, net: MechanismNet):
        self.net = net

    def shares_and_own_grads(self, endowments, growth, rho, rng=None):
        """Shares plus d shares_i / d rho_i via a directional derivative.

        For each participant i, perturbing rho_i moves input coordinate 4+i
        by e_i; pushing that direction through tanh and the softmax Jacobian
        (ds = s * (dh - <s, dh>)) yields the diagonal share sensitivity. The
        expression is built from dual-aware kernels so that, during
        differentiable training, its dependence on the net parameters is
        tracked without nested differentiation.
        """
        e = np.asarray(endowments, dtype=float)
        contributions = rho * e
        shares, z = self.net.forward_shares(e, contributions)
        gain = 1.0 - z * z
        grads = []
        for i in range(e.shape[-1]):
            dz = gain * self.net.w1[..., 4 + i, :] * e[..., i : i + 1]
            dh = dual.vecmat(dz, self.net.w2)
            ds = shares * (dh - dual.expand_last(dual.dot(shares, dh)))
            grads.append(ds[..., i])
        return shares, dual.stack(grads, axis=-1)

    def payouts(self, endowments, growth, rho, rng=None):
        e = np.asarray(endowments, dtype=float)
        contributions = rho * e
        shares, _ = self.net.forward_shares(e, contributions)
        pool = growth * dual.total(contributions, axis=-1)
        return shares * dual.expand_last(pool)


class MatrixMechanism:
    """A frozen matrix-game mechanism given by cooperation probabilities."""

    def __init__(self, coop, label: str = "mechanism"):
        self.coop = coop
        self.label = label

    @classmethod
    def from_strategy(cls, strategy: FixedStrategy) -> "MatrixMechanism":
        return cls(strategy.coop_probs(), label=strategy.name)

    @classmethod
    def from_logits(cls, params, label: str = "IO-Loop") -> "MatrixMechanism":
        return cls(dual.sigmoid(params), label=label)
