"""
mnarlbm -- Co-clustering of binary matrices with nonignorable missing values.

The Latent Block Model is extended with a missingness mechanism whose propensity depends
on row and column effects and, for not-missing-at-random data, on the unobserved value
itself. The package simulates from the model, fits it by variational EM, selects class
counts and missingness kinds with ICL and measures classification and recovery errors.
"""
from mnarlbm import utils

__version__ = "0.1.0"

__all__ = [
    "commands",
    "config",
    "experiments",
    "inference",
    "logging",
    "metrics",
    "model",
    "parsers",
    "results",
    "schema",
    "selection",
    "simulation",
    "tests",
    "utils",
]
