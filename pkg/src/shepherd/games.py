"""Game environments: iterated 2x2 matrix games and the resource-allocation game.

Matrix games are solved in closed form. With one-memory policies the joint
play is a Markov chain over ``(s0, CC, CD, DC, DD)`` (first letter is the
mechanism's previous action); rewards are granted on arrival at each state,
so the state value satisfies ``V = (I - g*T)^-1 T r`` and the reported
return is the normalized initial-state value ``(1-g) * V(s0)``, which lives
in the raw payoff range. All numeric paths accept leading batch axes and
:class:`~shepherd.dual.Dual` inputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import dual
from .errors import ContractViolationError, DomainError

STATES = ("s0", "CC", "CD", "DC", "DD")
PAYOFF_VALUES = frozenset({0, -1, -2, -3})
DEFAULT_DISCOUNT = 0.96

# Conventional labels keyed by the payoff ordering (best to worst among
# R, S, T, P). Entries for orderings with r_P > r_R (Deadlock, Compromise)
# are matched through the cooperate/defect relabeling.
_NAMES_BY_ORDER = {
    "TRPS": "PrisonersDilemma",
    "TRSP": "Chicken",
    "TSRP": "Leader",
    "STRP": "Hero",
    "RTPS": "StagHunt",
    "RPTS": "Assurance",
    "RPST": "Coordination",
    "RSTP": "Harmony",
    "RSPT": "Concord",
    "RTSP": "Peace",
    "TPRS": "Deadlock",
    "TPSR": "Compromise",
}


@dataclass(frozen=True)
class GameSpec:
    """Payoff assignment (r_R, r_S, r_T, r_P) for one symmetric 2x2 game."""

    r_R: int
    r_S: int
    r_T: int
    r_P: int
    name: str | None = None

    def __post_init__(self):
        if set(self.payoffs) != PAYOFF_VALUES:
            raise DomainError(
                f"payoffs {self.payoffs} must be a permutation of {sorted(PAYOFF_VALUES)}"
            )

    @property
    def payoffs(self) -> tuple[int, int, int, int]:
        return (self.r_R, self.r_S, self.r_T, self.r_P)

    @property
    def is_canonical(self) -> bool:
        return self.r_R > self.r_P

    def mirrored(self) -> "GameSpec":
        """The same game with cooperate/defect labels swapped: (P, T, S, R)."""
        return GameSpec(self.r_P, self.r_T, self.r_S, self.r_R)

    def canonical(self) -> "GameSpec":
        spec = self if self.is_canonical else self.mirrored()
        return GameSpec(*spec.payoffs, name=canonical_name(spec))

    def ordering(self) -> str:
        """Payoff labels sorted best to worst, e.g. 'TRPS'."""
        pairs = sorted(zip(self.payoffs, "RSTP"), reverse=True)
        return "".join(label for _, label in pairs)


def canonical_name(spec: GameSpec) -> str | None:
    """Conventional label for a spec's equivalence class, if one exists."""
    name = _NAMES_BY_ORDER.get(spec.ordering())
    if name is None:
        name = _NAMES_BY_ORDER.get(spec.mirrored().ordering())
    return name


def enumerate_games() -> list[GameSpec]:
    """The 12 canonical symmetric 2x2 games with distinct payoffs in {0,..,-3}.

    All 24 assignments of {0,-1,-2,-3} to (R, S, T, P), quotiented by the
    relabeling symmetry (R,S,T,P) ~ (P,T,S,R); the representative has
    r_R > r_P. Stable order: lexicographically descending payoff tuples.
    """
    reps = [
        GameSpec(*perm)
        for perm in itertools.permutations(sorted(PAYOFF_VALUES, reverse=True))
        if perm[0] > perm[3]
    ]
    reps.sort(key=lambda s: s.payoffs, reverse=True)
    return [GameSpec(*s.payoffs, name=canonical_name(s)) for s in reps]


def game_by_name(name: str) -> GameSpec:
    for spec in enumerate_games():
        if spec.name == name:
            return spec
    valid = ", ".join(s.name for s in enumerate_games())
    raise DomainError(f"unknown game {name!r}; valid names: {valid}")


@dataclass(frozen=True)
class MatrixGameMDP:
    """A repeated matrix game as a 5-state Markov decision process."""

    spec: GameSpec
    discount: float = DEFAULT_DISCOUNT

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise DomainError(f"discount must lie in [0, 1), got {self.discount}")

    @property
    def reward_mechanism(self) -> np.ndarray:
        s = self.spec
        return np.array([0.0, s.r_R, s.r_S, s.r_T, s.r_P])

    @property
    def reward_participant(self) -> np.ndarray:
        s = self.spec
        return np.array([0.0, s.r_R, s.r_T, s.r_S, s.r_P])


def transition_kernel(mech_coop, part_coop):
    """Next-state distribution rows from both players' cooperation probabilities.

    Inputs are 5-vectors (leading batch axes allowed, duals allowed); the row
    for state ``s`` is ``(0, ab, a(1-b), (1-a)b, (1-a)(1-b))`` with
    ``a = mech_coop[s]`` and ``b = part_coop[s]``.
    """
    for probs, side in ((mech_coop, "mech_coop"), (part_coop, "part_coop")):
        v = dual.value_of(probs)
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise DomainError(f"{side} probabilities must lie in [0, 1]")
    a, b = mech_coop, part_coop
    zero = a * 0.0
    return dual.stack(
        [zero, a * b, a * (1.0 - b), (1.0 - a) * b, (1.0 - a) * (1.0 - b)],
        axis=-1,
    )


def _discounted_values(mdp, kernel, reward):
    """State values (I - g*T)^-1 T r, plus the system matrix for reuse."""
    system = np.eye(5) - mdp.discount * kernel
    v = dual.solve(system, dual.matvec(kernel, reward))
    return v, system


def returns_from_probs(mdp, mech_coop, part_coop):
    """Normalized returns (R_m, R_p) given cooperation probabilities."""
    kernel = transition_kernel(mech_coop, part_coop)
    vm, system = _discounted_values(mdp, kernel, mdp.reward_mechanism)
    vp = dual.solve(system, dual.matvec(kernel, mdp.reward_participant))
    norm = 1.0 - mdp.discount
    return norm * vm[..., 0], norm * vp[..., 0]


def matrix_game_returns(mdp, mech_policy, part_policy):
    """Exact normalized returns for one-memory policies given as logits."""
    a = dual.sigmoid(_policy_params(mech_policy))
    b = dual.sigmoid(_policy_params(part_policy))
    return returns_from_probs(mdp, a, b)


def _policy_params(policy):
    params = getattr(policy, "params", policy)
    return params if isinstance(params, dual.Dual) else np.asarray(params, dtype=float)


def matrix_returns_and_participant_grad(mdp, mech_coop, part_logits):
    """Returns (R_m, R_p, dR_p/d part_logits), the gradient in closed form.

    Differentiating ``R_p = (1-g) e0' (I-gT)^-1 T r_p`` with respect to the
    participant's cooperation probability in state k perturbs only row k of
    the kernel, giving ``dR_p/db_k = (1-g) u_k * (D_k . (g V_p + r_p))`` with
    ``u = (I-gT)^-T e0`` and ``D_k = (0, a_k, -a_k, 1-a_k, -(1-a_k))``; the
    logit gradient scales by b(1-b). Evaluating this expression in dual
    arithmetic exposes its dependence on the mechanism's parameters without
    nested differentiation.
    """
    a = mech_coop
    b = dual.sigmoid(part_logits)
    kernel = transition_kernel(a, b)
    g = mdp.discount
    vm, system = _discounted_values(mdp, kernel, mdp.reward_mechanism)
    vp = dual.solve(system, dual.matvec(kernel, mdp.reward_participant))
    norm = 1.0 - g

    e0 = np.zeros(5)
    e0[0] = 1.0
    u = dual.solve(dual.transpose(system), e0)
    w = g * vp + mdp.reward_participant
    zero = a * 0.0
    row_sensitivity = dual.stack([zero, a, -a, 1.0 - a, -(1.0 - a)], axis=-1)
    grad = norm * u * dual.matvec(row_sensitivity, w) * (b * (1.0 - b))
    return norm * vm[..., 0], norm * vp[..., 0], grad


# -- public goods / resource allocation ---------------------------------------


@dataclass(frozen=True)
class PggSpec:
    """Four-participant public-goods game with a fixed pool growth factor."""

    endowments: tuple[float, ...] = (1.0, 0.5, 0.4, 0.3)
    growth: float = 1.6
    n_participants: int = 4

    def __post_init__(self):
        if self.n_participants != 4:
            raise DomainError("the game is defined for exactly 4 participants")
        e = np.asarray(self.endowments, dtype=float)
        if e.shape[-1] != self.n_participants:
            raise DomainError("endowments must have one entry per participant")
        if np.any(e < 0.2) or np.any(e > 1.0):
            raise DomainError("endowments must lie in [0.2, 1.0]")
        object.__setattr__(self, "endowments", tuple(float(x) for x in e))

    @property
    def endowment_array(self) -> np.ndarray:
        return np.asarray(self.endowments, dtype=float)


@dataclass(frozen=True)
class PggOutcome:
    """One resolved round: contributions, payouts, and both sides' returns."""

    contributions: np.ndarray
    payouts: np.ndarray
    participant_returns: np.ndarray
    mechanism_return: float
    pool: float = field(default=0.0)

    @property
    def welfare(self) -> float:
        return self.mechanism_return


POOL_TOL = 1e-9


def pgg_round(spec: PggSpec, rho, payouts) -> PggOutcome:
    """Resolve one round from contribution fractions and mechanism payouts.

    The mechanism must conserve the grown pool: ``sum(payouts)`` has to match
    ``growth * sum(rho * e)`` within 1e-9 and payouts must be nonnegative,
    otherwise a :class:`ContractViolationError` is raised.
    """
    rho = np.asarray(rho, dtype=float)
    payouts = np.asarray(payouts, dtype=float)
    if rho.shape != (spec.n_participants,) or payouts.shape != (spec.n_participants,):
        raise DomainError("rho and payouts must be 4-vectors")
    if np.any(rho < 0.0) or np.any(rho > 1.0):
        raise DomainError("contribution fractions must lie in [0, 1]")
    e = spec.endowment_array
    contributions = rho * e
    grown = spec.growth * contributions.sum()
    if np.any(payouts < 0.0):
        raise ContractViolationError("payouts must be nonnegative")
    if abs(payouts.sum() - grown) > POOL_TOL:
        raise ContractViolationError(
            f"payouts sum {payouts.sum()!r} does not conserve the grown pool {grown!r}"
        )
    participant_returns = payouts + (1.0 - rho) * e
    return PggOutcome(
        contributions=contributions,
        payouts=payouts,
        participant_returns=participant_returns,
        mechanism_return=float(participant_returns.mean()),
        pool=float(grown),
    )
