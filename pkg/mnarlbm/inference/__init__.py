"""The :mod:`mnarlbm.inference` package implements the variational EM engine: the
delta-method criterion and its gradient, the spectral and random initializations, the
quasi-Newton half-steps and the single and multi-start fits."""
from mnarlbm.inference.criterion import (
    ElboEvaluation,
    delta_expectation,
    elbo,
    elbo_and_gradient,
    elbo_terms,
    entropy,
)
from mnarlbm.inference.init import init_random, init_spectral
from mnarlbm.inference.state import FitConfig, FitResult, VariationalState
from mnarlbm.inference.vem import fit, m_step, multi_start_fit, ve_step

__all__ = [
    "ElboEvaluation",
    "FitConfig",
    "FitResult",
    "VariationalState",
    "delta_expectation",
    "elbo",
    "elbo_and_gradient",
    "elbo_terms",
    "entropy",
    "fit",
    "init_random",
    "init_spectral",
    "m_step",
    "multi_start_fit",
    "ve_step",
]
