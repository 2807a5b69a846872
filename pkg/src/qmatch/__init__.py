"""Distributions of posterior quantiles: bounds, matching experiments, optima and checks."""

from .dist import (
    Cdf,
    Domain,
    DomainError,
    InvariantError,
    QuantileInterval,
    atomic,
    dirac,
    from_points,
    ks_distance,
    mix,
    quantile_interval,
    stieltjes_integral,
    uniform,
)
from .gerrymander import ElectoralModel, district_plan, objective_from_mode, seat_share_curve
from .implement import (
    FiniteExperiment,
    NotImplementableError,
    ParametricExperiment,
    Selection,
    bayes_residual,
    discretize_experiment,
    is_implementable,
    matching_experiment,
    matching_selection,
    nam_experiment,
    pushforward,
    quantile_bounds,
)
from .objective import Objective, argmax_interval
from .optimize import (
    Optimum,
    feasible_interval,
    hp_distribution,
    optimize_quantile_dist,
    solution_quasiconcave,
    solution_quasiconvex,
)
from .unique import dyadic_refine, full_revelation, unique_experiment, verify_unique
from .verify import (
    FeasibilityProblem,
    brute_force_implementable,
    feasibility_check,
    regret,
    simulate,
    uniqueness_probe,
)

__all__ = [
    "Cdf",
    "Domain",
    "DomainError",
    "InvariantError",
    "QuantileInterval",
    "atomic",
    "dirac",
    "from_points",
    "ks_distance",
    "mix",
    "quantile_interval",
    "stieltjes_integral",
    "uniform",
    "ElectoralModel",
    "district_plan",
    "objective_from_mode",
    "seat_share_curve",
    "FiniteExperiment",
    "NotImplementableError",
    "ParametricExperiment",
    "Selection",
    "bayes_residual",
    "discretize_experiment",
    "is_implementable",
    "matching_experiment",
    "matching_selection",
    "nam_experiment",
    "pushforward",
    "quantile_bounds",
    "Objective",
    "argmax_interval",
    "Optimum",
    "feasible_interval",
    "hp_distribution",
    "optimize_quantile_dist",
    "solution_quasiconcave",
    "solution_quasiconvex",
    "dyadic_refine",
    "full_revelation",
    "unique_experiment",
    "verify_unique",
    "FeasibilityProblem",
    "brute_force_implementable",
    "feasibility_check",
    "regret",
    "simulate",
    "uniqueness_probe",
]

__version__ = "0.1.0"
