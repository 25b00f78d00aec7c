"""Cell-level probabilities and the complete-data log-likelihood.

All functions are pure and accumulate in log space.
"""
from typing import Dict, Tuple

import numpy as np
from mnarlbm.model.exceptions import ContractError, DimensionMismatchError, DomainError
from mnarlbm.model.types import (
    CellState,
    CompleteSample,
    ModelParams,
)
from scipy.special import expit, log_expit
from scipy.stats import norm


def logistic(x):
    """The logistic function :math:`1 / (1 + e^{-x})`.

    The evaluation never overflows, whatever the magnitude of `x`.

    :param x: A finite real or an array of finite reals
    :return: The logistic of `x`, of the same shape
    :rtype: float or numpy.ndarray

    :raises DomainError: `x` holds a non-finite value
    """
    values = np.asarray(x, dtype=float)

    if not np.all(np.isfinite(values)):
        raise DomainError("x", x, "the finite reals")

    result = expit(values)

    return float(result) if result.ndim == 0 else result


def cell_probs(
    pi_ql: float, mu: float, a: float, b: float, p: float, q: float
) -> Tuple[float, float, float]:
    """Returns the probabilities of observing a zero, a one, or a missing value.

    With :math:`u_1 = \\mu + a + b + p + q` and :math:`u_0 = \\mu + a - b + p - q`:

    - :math:`p_0 = (1 - \\pi_{ql})\\, \\mathrm{logistic}(u_0)`
    - :math:`p_1 = \\pi_{ql}\\, \\mathrm{logistic}(u_1)`
    - :math:`p_{NA} = 1 - p_0 - p_1`

    :param float pi_ql: The block probability, in the open interval (0, 1)
    :param float mu: The global propensity
    :param float a: Row effect :math:`A_i`
    :param float b: Row effect :math:`B_i`
    :param float p: Column effect :math:`P_j`
    :param float q: Column effect :math:`Q_j`
    :return: The triple ``(p0, p1, p_na)``
    :rtype: tuple[float, float, float]

    :raises DomainError: `pi_ql` is outside (0, 1) or a latent is not finite
    """
    if not 0.0 < pi_ql < 1.0:
        raise DomainError("pi_ql", pi_ql, "(0, 1)")

    for name, value in (("mu", mu), ("a", a), ("b", b), ("p", p), ("q", q)):
        if not np.isfinite(value):
            raise DomainError(name, value, "the finite reals")

    u1 = mu + a + b + p + q
    u0 = mu + a - b + p - q
    p1 = pi_ql * float(expit(u1))
    p0 = (1.0 - pi_ql) * float(expit(u0))
    # both complements are formed from expit(-u) to keep p_na accurate near zero
    p_na = pi_ql * float(expit(-u1)) + (1.0 - pi_ql) * float(expit(-u0))

    return p0, p1, p_na


def _check_sample(sample: CompleteSample, params: ModelParams) -> None:
    if sample.row_labels.size and (
        sample.row_labels.min() < 0 or sample.row_labels.max() >= params.nq
    ):
        raise ContractError(f"row labels must lie in [0, {params.nq})")

    if sample.col_labels.size and (
        sample.col_labels.min() < 0 or sample.col_labels.max() >= params.nl
    ):
        raise ContractError(f"column labels must lie in [0, {params.nl})")

    for block in ("a", "b", "p", "q"):
        if params.variance(block) == 0.0 and np.any(sample.latent(block) != 0.0):
            raise ContractError(
                f"latent block '{block}' has variance 0 under {params.kind.name} but "
                "non-zero values"
            )


def loglik_terms(sample: CompleteSample, params: ModelParams) -> Dict[str, float]:
    """Evaluates the seven terms of the complete-data log-likelihood.

    The terms are the row and column label terms, the four Gaussian latent terms, and
    the cell term of the categorical observation model. A Gaussian term is zero for a
    block whose variance is zero.

    :param CompleteSample sample: The complete sample
    :param ModelParams params: The model parameters
    :return: A mapping with keys ``rows``, ``cols``, ``a``, ``b``, ``p``, ``q`` and
      ``cells``
    :rtype: dict[str, float]

    :raises ContractError: The sample and parameters are inconsistent
    """
    if params.nq < 1 or params.nl < 1:
        raise ContractError("parameters need at least one class per dimension")

    _check_sample(sample, params)

    terms = {
        "rows": float(np.log(params.alpha_rows)[sample.row_labels].sum()),
        "cols": float(np.log(params.alpha_cols)[sample.col_labels].sum()),
    }

    for block in ("a", "b", "p", "q"):
        var = params.variance(block)
        terms[block] = (
            float(norm.logpdf(sample.latent(block), scale=np.sqrt(var)).sum())
            if var > 0.0
            else 0.0
        )

    cells = sample.x_observed.cells
    pi = params.pi[np.ix_(sample.row_labels, sample.col_labels)]
    x = params.mu + sample.a[:, None] + sample.p[None, :]
    y = sample.b[:, None] + sample.q[None, :]
    u1 = x + y
    u0 = x - y
    log_p1 = np.log(pi) + log_expit(u1)
    log_p0 = np.log1p(-pi) + log_expit(u0)
    log_na = np.logaddexp(np.log(pi) + log_expit(-u1), np.log1p(-pi) + log_expit(-u0))
    terms["cells"] = float(
        np.sum(
            np.where(
                cells == CellState.ONE,
                log_p1,
                np.where(cells == CellState.ZERO, log_p0, log_na),
            )
        )
    )

    return terms


def complete_loglik(sample: CompleteSample, params: ModelParams) -> float:
    """The complete-data log-likelihood :math:`\\log p(X^o, Y^1, Y^2, A, B, P, Q)`.

    :param CompleteSample sample: The complete sample
    :param ModelParams params: The model parameters
    :return: The log-likelihood, the sum of :func:`loglik_terms`
    :rtype: float

    :raises DimensionMismatchError: The sample does not match the parameters
    :raises ContractError: The sample violates the kind constraints
    """
    if sample.x_observed.shape != (sample.n_rows, sample.n_cols):
        raise DimensionMismatchError(
            "x_observed", (sample.n_rows, sample.n_cols), sample.x_observed.shape
        )

    return float(sum(loglik_terms(sample, params).values()))
