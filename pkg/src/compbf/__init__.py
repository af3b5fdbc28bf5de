"""Coordinated beamforming with dynamic K-nearest clustering in Poisson networks.

Analytical SIR distributions, Monte-Carlo validation, spectral efficiency
with pilot overhead, and the choice of cluster cardinality.
"""
__version__ = "0.1.0"

from .analytic import (ClusterConfig, SirCcdfCurve, ccdf_conditional_bounds,
                       ccdf_conditional_exact, ccdf_marginal_approx, ccdf_marginal_bounds,
                       ccdf_theorem1, delta1_cdf, delta1_mean, delta1_pdf, low_sir_expansion)
from .errors import CompbfError, DomainError
from .montecarlo import McExperiment, EmpiricalCcdf, empirical_spectral_efficiency, run_experiment
from .specfun import a_function, d_function, d_function_beta4, laplace_interference
from .spectral import (OverheadModel, OptimizationResult, eta_from_pilot_sinr,
                       ergodic_se_conditional, ergodic_se_marginal, optimize_k)

__all__ = [
    "ClusterConfig", "SirCcdfCurve", "ccdf_conditional_bounds", "ccdf_conditional_exact",
    "ccdf_marginal_approx", "ccdf_marginal_bounds", "ccdf_theorem1", "delta1_cdf",
    "delta1_mean", "delta1_pdf", "low_sir_expansion", "CompbfError", "DomainError",
    "McExperiment", "EmpiricalCcdf", "empirical_spectral_efficiency", "run_experiment",
    "a_function", "d_function", "d_function_beta4", "laplace_interference",
    "OverheadModel", "OptimizationResult", "eta_from_pilot_sinr", "ergodic_se_conditional",
    "ergodic_se_marginal", "optimize_k",
]
