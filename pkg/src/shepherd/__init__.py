"""Training and evaluation toolkit for mechanism agents that shape the
learning of adaptive co-players, on iterated 2x2 matrix games and a
public-goods resource-allocation game."""

from .errors import (
    CheckpointError,
    ConfigError,
    ContractViolationError,
    DomainError,
    NumericalError,
    ShepherdError,
)
from .games import (
    GameSpec,
    MatrixGameMDP,
    PggOutcome,
    PggSpec,
    enumerate_games,
    game_by_name,
    matrix_game_returns,
    pgg_round,
    transition_kernel,
)
from .policies import (
    BaselineMechanism,
    FixedStrategy,
    MechanismNet,
    NetMechanism,
    OneMemoryPolicy,
    PggParticipantPolicy,
    baseline_redistribution,
    coop_probs,
    mechanism_payouts,
)
from .training import (
    MatrixGameEnv,
    PggEnv,
    TrainConfig,
    TrainResult,
    diff_md_step,
    es_md_step,
    lola_step,
    make_env,
    matrix_defaults,
    participant_grad,
    pgg_defaults,
    run_inner_loop,
    run_inner_outer,
)
from .evalharness import (
    LearningCurve,
    compare_suite,
    evaluate_mechanism,
    export_curves,
)

__version__ = "0.1.0"
