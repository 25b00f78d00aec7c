"""The :mod:`mnarlbm.model` package provides the domain types of the Latent Block Model
extended to missing data, and the pure functions evaluating its cell probabilities and
complete-data log-likelihood."""
from mnarlbm.model.core import cell_probs, complete_loglik, logistic
from mnarlbm.model.types import (
    CellState,
    CompleteSample,
    MissingnessKind,
    ModelParams,
    ObservedMatrix,
)

__all__ = [
    "CellState",
    "CompleteSample",
    "MissingnessKind",
    "ModelParams",
    "ObservedMatrix",
    "cell_probs",
    "complete_loglik",
    "logistic",
]
