"""Stochastic interpolation toward a target law, with certified error bounds.

The package simulates the entropic interpolation X_t = t*X_1 + Brownian
bridge, discretizes it with several one-step schemes, and checks the
resulting laws against closed-form oracles and upper bounds.
"""

from .estimates import Estimate
from .grids import TimeGrid, grid_explicit, grid_uniform_t, grid_uniform_tau, random_tau_grid
from .measures import TargetMeasure, entropy_vs_gaussian, fisher_vs_gaussian
from .metrics import (
    bound_ada,
    bound_ada_lowdim,
    bound_em,
    bound_fisher,
    covering_number,
    energy_distance,
    gaussian_width,
    kl_gaussian,
    kl_knn,
)
from .process import (
    FollmerEnsemble,
    debruijn_check,
    drift_value,
    entropy_via_drift,
    expected_drift_squared,
    simulate_follmer,
    tweedie_check,
)
from .samplers import (
    DdpmParams,
    exact_terminal_law,
    params_ada,
    params_expint,
    params_standard,
    propagate_gaussian_law,
    run_ada,
    run_ddpm,
    run_em,
)
from .scores import EmpiricalMixtureScore, ExactScore, PerturbedScore, ScoreModel, epsilon_score

__version__ = "0.1.0"

__all__ = [
    "DdpmParams",
    "EmpiricalMixtureScore",
    "Estimate",
    "ExactScore",
    "FollmerEnsemble",
    "PerturbedScore",
    "ScoreModel",
    "TargetMeasure",
    "TimeGrid",
    "bound_ada",
    "bound_ada_lowdim",
    "bound_em",
    "bound_fisher",
    "covering_number",
    "debruijn_check",
    "drift_value",
    "energy_distance",
    "entropy_via_drift",
    "entropy_vs_gaussian",
    "epsilon_score",
    "exact_terminal_law",
    "expected_drift_squared",
    "fisher_vs_gaussian",
    "gaussian_width",
    "grid_explicit",
    "grid_uniform_t",
    "grid_uniform_tau",
    "kl_gaussian",
    "kl_knn",
    "params_ada",
    "params_expint",
    "params_standard",
    "propagate_gaussian_law",
    "random_tau_grid",
    "run_ada",
    "run_ddpm",
    "run_em",
    "simulate_follmer",
    "tweedie_check",
    "__version__",
]
