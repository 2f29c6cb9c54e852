"""Spatial sampling designs for kriging with estimated covariance parameters.

The central quantity is MEK, the maximum over an evaluation grid of the
kriging variance corrected for the uncertainty of estimated covariance
parameters. Designs are searched over a finite candidate grid with
information-based surrogates (a Pareto front of ``log|M_beta|`` and
``log|M_nu|``), an exchange algorithm, greedy augmentation or direct
annealing on MEK.
"""
from .covariance import CovParams, KernelFamily, Scaling, Variant, kernel_grad_nu, kernel_value
from .criteria import GridCriteria
from .designs import LhSpec, coffeehouse, lh_star_7, random_lh, snap_to_grid
from .errors import (
    ConvergenceError,
    DesignMismatchError,
    DomainError,
    DuplicatePointError,
    EkDesignError,
    FitError,
    NonEstimableError,
    SingularMatrixError,
)
from .fitting import FieldData, FitResult, gls_given_nu, profile_ml
from .information import j_alpha, log_dets, m_beta, m_theta, v_nu
from .kriging import corrected_kriging_variance, ek_surface, kriging_variance, kriging_weights, mek, predict, simulate_field
from .model import Design, GpModel, GridSpace
from .optimize import (
    SaConfig,
    direct_sa_mek,
    exchange_algorithm,
    greedy_augment,
    local_optimization,
    pareto_sa,
    simulated_annealing,
)
from .pareto import ParetoFront, ParetoPoint

__version__ = "0.1.0"

__all__ = [
    "CovParams", "KernelFamily", "Scaling", "Variant", "kernel_value", "kernel_grad_nu",
    "GridCriteria", "LhSpec", "coffeehouse", "lh_star_7", "random_lh", "snap_to_grid",
    "ConvergenceError", "DesignMismatchError", "DomainError", "DuplicatePointError", "EkDesignError",
    "FitError", "NonEstimableError", "SingularMatrixError",
    "FieldData", "FitResult", "gls_given_nu", "profile_ml",
    "j_alpha", "log_dets", "m_beta", "m_theta", "v_nu",
    "corrected_kriging_variance", "ek_surface", "kriging_variance", "kriging_weights", "mek", "predict",
    "simulate_field", "Design", "GpModel", "GridSpace",
    "SaConfig", "direct_sa_mek", "exchange_algorithm", "greedy_augment", "local_optimization", "pareto_sa",
    "simulated_annealing", "ParetoFront", "ParetoPoint",
]
