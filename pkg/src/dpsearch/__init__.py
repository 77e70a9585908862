"""Anytime heuristic search over declarative dynamic programming models.

A model is a state schema, a target state, transitions with preconditions,
effects and costs, base cases, and optional dual bounds, resource orderings
and state constraints. Three anytime solvers (beam search with doubling
widths plus two progressive best-first variants) share bound pruning and
resource dominance, and accept interchangeable guidance: dual bounds, path
cost only, greedy rollouts, or small trained value/policy networks.
"""

from .model import (
    BaseCase, Direction, INF, InvalidSolutionError, MalformedStateError, Model,
    ModelError, OracleTooLargeError, PreconditionError, Resource, SolutionCheck,
    StateSchema, Transition, UnknownTransitionError, Variable, bits,
)
from .search import (
    DominanceRegistry, Incumbent, RegisterOutcome, SearchLimits, SearchNode,
    SOLVERS, SolveResult, beam_search_once, order_key, prune_test, solve,
    solve_acps, solve_apps, solve_cabs,
)
from .guidance import (
    ChildEval, DualBoundGuidance, GreedyRolloutGuidance, MalformedPolicyError,
    PI_FLOOR, PolicyGuidance, ValueNetGuidance, ZeroHGuidance, f_dual, f_policy,
    h_greedy_rollout, perfect_evaluator, rollout_horizon,
)
from .nn import (
    AdamState, ForwardCache, Grads, Layer, NetworkParams, ShapeError,
    WEIGHT_FORMAT_VERSION, WeightFormatError, adam_step, backward, forward,
    forward_cached, init_network, load_params, masked_softmax, save_params,
)
from .mdp import InvalidActionError, Mdp, REWARD_SCALE, build_mdp, completion_bonus
from .training import (
    DivergenceError, DqnBatch, PpoBatch, ReplayBuffer, TrainConfig, TrainResult,
    default_config, dqn_loss, greedy_sequence, make_network, policy_greedy_select,
    ppo_loss, q_greedy_select, train_dqn, train_ppo,
)
from .experiment import (
    ExperimentConfig, RunRecord, SampleResult, compute_gap, export_results,
    load_results, make_evaluator, run_search_experiment, sample_solve,
)
from . import domains

__version__ = "0.1.0"

__all__ = [
    "AdamState", "BaseCase", "ChildEval", "Direction", "DivergenceError",
    "DominanceRegistry", "DqnBatch", "DualBoundGuidance", "ExperimentConfig",
    "ForwardCache", "Grads", "GreedyRolloutGuidance", "INF", "Incumbent",
    "InvalidActionError", "InvalidSolutionError", "Layer", "MalformedPolicyError",
    "MalformedStateError", "Mdp", "Model", "ModelError", "NetworkParams",
    "OracleTooLargeError", "PI_FLOOR", "PolicyGuidance", "PpoBatch",
    "PreconditionError", "REWARD_SCALE", "RegisterOutcome", "ReplayBuffer",
    "Resource", "RunRecord", "SOLVERS", "SampleResult", "SearchLimits",
    "SearchNode", "ShapeError", "SolutionCheck", "SolveResult", "StateSchema",
    "TrainConfig", "TrainResult", "Transition", "UnknownTransitionError",
    "ValueNetGuidance", "Variable", "WEIGHT_FORMAT_VERSION", "WeightFormatError",
    "ZeroHGuidance", "adam_step", "backward", "beam_search_once", "bits",
    "build_mdp", "completion_bonus", "compute_gap", "default_config", "domains",
    "dqn_loss", "export_results", "f_dual", "f_policy", "forward",
    "forward_cached", "greedy_sequence", "h_greedy_rollout", "init_network",
    "load_params", "load_results", "make_evaluator", "make_network",
    "masked_softmax", "order_key", "perfect_evaluator", "policy_greedy_select",
    "ppo_loss", "prune_test", "q_greedy_select", "rollout_horizon",
    "run_search_experiment", "sample_solve", "save_params", "solve",
    "solve_acps", "solve_apps", "solve_cabs", "train_dqn", "train_ppo",
]
