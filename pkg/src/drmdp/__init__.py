"""Distributionally robust MDP solver with polyhedral ambiguity sets."""

from .ambiguity import (
    FactorMap,
    LiftedAmbiguitySet,
    build_hybrid_wasserstein_mad,
    build_mixture,
    build_phi_divergence_tv,
    build_support_only,
    build_uncertain_mean,
    build_wasserstein,
    validate,
)
from .engine import (
    DrMdpModel,
    RandomizedPolicy,
    ValueFunction,
    backward_induction,
    bellman_operator,
    evaluate_policy_worst_case,
    value_iteration,
)
from .newsvendor import NewsvendorConfig, run_experiment
from .reformulation import solve_srobust, worst_case_expectation

__version__ = "0.1.0"

__all__ = [
    "FactorMap",
    "LiftedAmbiguitySet",
    "build_hybrid_wasserstein_mad",
    "build_mixture",
    "build_phi_divergence_tv",
    "build_support_only",
    "build_uncertain_mean",
    "build_wasserstein",
    "validate",
    "DrMdpModel",
    "RandomizedPolicy",
    "ValueFunction",
    "backward_induction",
    "bellman_operator",
    "evaluate_policy_worst_case",
    "value_iteration",
    "NewsvendorConfig",
    "run_experiment",
    "solve_srobust",
    "worst_case_expectation",
]
