"""Recovery diagnostics of fitted parameters and latent effects."""
import math
from typing import Tuple

import numpy as np
from mnarlbm.inference.state import LATENT_BLOCKS, VariationalState
from mnarlbm.model import CompleteSample, ModelParams
from mnarlbm.model.exceptions import DimensionMismatchError


def param_max_error(
    truth: ModelParams, fitted: ModelParams, row_perm, col_perm
) -> float:
    """Largest absolute error on the block probabilities after alignment.

    Fitted class ``q`` is compared with true class ``row_perm[q]``, as returned by
    :func:`mnarlbm.metrics.align_labels`.

    :param ModelParams truth: The true parameters
    :param ModelParams fitted: The fitted parameters
    :param row_perm: Permutation of the fitted row classes
    :param col_perm: Permutation of the fitted column classes
    :rtype: float

    :raises DimensionMismatchError: The class counts differ
    """
    if (truth.nq, truth.nl) != (fitted.nq, fitted.nl):
        raise DimensionMismatchError(
            "classes", (truth.nq, truth.nl), (fitted.nq, fitted.nl)
        )

    aligned = np.empty_like(fitted.pi)
    aligned[np.ix_(np.asarray(row_perm), np.asarray(col_perm))] = fitted.pi

    return float(np.max(np.abs(truth.pi - aligned)))


def latent_mse(
    truth: CompleteSample, gamma: VariationalState
) -> Tuple[float, float, float, float]:
    """Mean squared errors of the posterior means of the latent effects.

    A block absent from `gamma` gets a NaN error.

    :param CompleteSample truth: The sample holding the true effects
    :param VariationalState gamma: The fitted posterior
    :return: ``(mse_a, mse_b, mse_p, mse_q)``
    :rtype: tuple[float, float, float, float]

    :raises DimensionMismatchError: The posterior does not match the sample
    """
    if (gamma.n_rows, gamma.n_cols) != (truth.n_rows, truth.n_cols):
        raise DimensionMismatchError(
            "posterior", (truth.n_rows, truth.n_cols), (gamma.n_rows, gamma.n_cols)
        )

    errors = []

    for block in LATENT_BLOCKS:
        nu = gamma.mean(block)
        errors.append(
            math.nan if nu is None else float(np.mean((nu - truth.latent(block)) ** 2))
        )

    return tuple(errors)
