"""Accountability metrics for treatment decisions delegated to an agent."""

from .population import (
    CovariatePoint,
    EmpiricalPopulation,
    Mu0Estimator,
    Policy,
    PolicyClass,
    PopulationModel,
    make_population,
)
from .rewards import RewardKind, RewardSpec, expected_reward, make_spec, realized_reward
from .response import best_response, brute_force_best_response, regret, utility
from .ranking import AgentProfile, audit_rankings, reweight_g
from .asymmetry import asym_regret, gamma_marg, gamma_max, marginalize_mu0, tightness_model

__version__ = "0.1.0"

__all__ = [
    "AgentProfile",
    "CovariatePoint",
    "EmpiricalPopulation",
    "Mu0Estimator",
    "Policy",
    "PolicyClass",
    "PopulationModel",
    "RewardKind",
    "RewardSpec",
    "asym_regret",
    "audit_rankings",
    "best_response",
    "brute_force_best_response",
    "expected_reward",
    "gamma_marg",
    "gamma_max",
    "make_population",
    "make_spec",
    "marginalize_mu0",
    "realized_reward",
    "regret",
    "reweight_g",
    "tightness_model",
    "utility",
]
