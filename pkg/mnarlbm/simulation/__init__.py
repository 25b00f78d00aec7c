"""The :mod:`mnarlbm.simulation` package samples matrices from the generative model,
builds the benchmark configurations, estimates the conditional Bayes risk and
calibrates the benchmark difficulty."""
from mnarlbm.simulation.risk import (
    RiskConfig,
    RiskEstimate,
    calibrate_epsilon,
    conditional_bayes_risk,
    estimate_risk,
    exact_posterior_marginals,
)
from mnarlbm.simulation.sampler import (
    DEFAULT_MNAR,
    BenchmarkConfig,
    make_benchmark_params,
    sample_lbm,
    shrink_sample,
)

__all__ = [
    "DEFAULT_MNAR",
    "BenchmarkConfig",
    "RiskConfig",
    "RiskEstimate",
    "calibrate_epsilon",
    "conditional_bayes_risk",
    "estimate_risk",
    "exact_posterior_marginals",
    "make_benchmark_params",
    "sample_lbm",
    "shrink_sample",
]
