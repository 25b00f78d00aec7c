"""Conditional Bayes risk of the co-clustering and calibration of the benchmark
difficulty.

The risk of the maximum a posteriori classifier given the observed matrix is
:math:`r_r + r_c - r_r r_c`, where :math:`r_r = 1 - \\frac{1}{n_1} \\sum_i \\max_q
P(Y^1_i = q \\mid X^o)` and :math:`r_c` is defined likewise on columns. The posterior
marginals come either from an exact enumeration over all label configurations, which is
only possible on tiny matrices whose mask does not depend on the labels, or from the
variational E-step with the parameters frozen at their true values.
"""
import itertools
import math
from collections.abc import Mapping
from typing import Optional, Tuple

import attr
import numpy as np
from attr import attrib, attrs, validators
from joblib import Parallel, delayed
from mnarlbm.inference.criterion import active_blocks, evaluate
from mnarlbm.inference.exceptions import DegenerateMatrixError
from mnarlbm.inference.init import smoothed_tau, spectral_coclustering
from mnarlbm.inference.state import FitConfig, VariationalState
from mnarlbm.inference.vem import ve_step_status
from mnarlbm.logging import logger
from mnarlbm.model import ModelParams, ObservedMatrix
from mnarlbm.simulation.exceptions import CalibrationError, EnumerationError
from mnarlbm.simulation.sampler import DEFAULT_MNAR, make_benchmark_params, sample_lbm
from mnarlbm.utils import SeedLike, resolve_n_jobs, spawn_seeds
from scipy.special import logsumexp

ENUMERATION_CAP = 2 ** 20
"""Largest number of label configurations the exact posterior enumerates."""

PERMUTATION_CAP = 720

EPSILON_BRACKET = (0.01, 0.49)

MAX_TARGET_RISK = 8.0 / 9.0

RISK_METHODS = ("auto", "variational", "exact")

Labels = Tuple[np.ndarray, np.ndarray]


def _positive(instance, attribute, value):
    if not value > 0:
        raise ValueError(f"'{attribute.name}' must be positive, got {value!r}")


@attrs(frozen=True)
class RiskConfig:
    """Configuration of the risk estimation and of the calibration.

    :param str risk_method: ``auto``, ``variational`` or ``exact``, defaults to
      ``auto`` (exact whenever admissible)
    :param int risk_max_iters: Cap on the E-step quasi-Newton iterations, defaults to
      200
    :param float risk_rel_tol: Relative tolerance on the criterion, defaults to
      ``1e-6``
    :param float gradient_tol: Projected-gradient tolerance, defaults to ``1e-5``
    :param int history_size: L-BFGS history size, defaults to 10
    :param int calibration_seeds: Number of matrices per probed :math:`\\epsilon`,
      defaults to 5
    :param float calibration_tol: Tolerance on the median risk, defaults to 0.005
    :param int max_bisections: Cap on the bisection steps, defaults to 40
    :param int n_jobs: Number of parallel workers, defaults to 1
    """

    risk_method: str = attrib(default="auto", validator=validators.in_(RISK_METHODS))
    risk_max_iters: int = attrib(default=200, converter=int, validator=_positive)
    risk_rel_tol: float = attrib(default=1e-6, converter=float, validator=_positive)
    gradient_tol: float = attrib(default=1e-5, converter=float, validator=_positive)
    history_size: int = attrib(default=10, converter=int, validator=_positive)
    calibration_seeds: int = attrib(default=5, converter=int, validator=_positive)
    calibration_tol: float = attrib(default=0.005, converter=float, validator=_positive)
    max_bisections: int = attrib(default=40, converter=int, validator=_positive)
    n_jobs: int = attrib(default=1, converter=int)

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "RiskConfig":
        """Builds a configuration from a mapping, ignoring unrelated keys."""
        names = {a.name for a in attr.fields(cls)}

        return cls(**{k: v for k, v in mapping.items() if k in names and v is not None})

    def fit_config(self) -> FitConfig:
        return FitConfig(
            max_vem_iters=1,
            elbo_rel_tol=self.risk_rel_tol,
            max_inner_iters=self.risk_max_iters,
            gradient_tol=self.gradient_tol,
            history_size=self.history_size,
        )


@attrs(frozen=True)
class RiskEstimate:
    """An estimated conditional Bayes risk.

    :ivar float risk: The co-clustering risk
    :ivar float row_risk: The row misclassification risk
    :ivar float col_risk: The column misclassification risk
    :ivar str method: ``exact`` or ``variational``
    :ivar bool converged: Whether the E-step converged
    """

    risk: float = attrib(converter=float)
    row_risk: float = attrib(converter=float)
    col_risk: float = attrib(converter=float)
    method: str = attrib()
    converged: bool = attrib(converter=bool)

    def to_dict(self) -> dict:
        return attr.asdict(self)


def risk_from_marginals(
    tau_rows: np.ndarray, tau_cols: np.ndarray
) -> Tuple[float, float, float]:
    """Returns ``(risk, row_risk, col_risk)`` of the MAP classifier."""
    row_risk = 1.0 - float(np.mean(np.max(tau_rows, axis=1)))
    col_risk = 1.0 - float(np.mean(np.max(tau_cols, axis=1)))

    return row_risk + col_risk - row_risk * col_risk, row_risk, col_risk


def _enumeration_refusal(x: ObservedMatrix, params: ModelParams) -> Optional[str]:
    if {"b", "q"} & set(active_blocks(params)):
        return "the mask depends on the labels under MNAR"

    cost = params.nq ** x.n_rows * params.nl ** x.n_cols

    if cost > ENUMERATION_CAP:
        return f"{cost} label configurations exceed the cap of {ENUMERATION_CAP}"

    return None


def exact_posterior_marginals(
    x: ObservedMatrix, params: ModelParams
) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior class marginals by enumeration of every label configuration.

    Without the :math:`B` and :math:`Q` effects the mask likelihood does not depend on
    the labels, so the posterior only involves the class proportions and the observed
    cells.

    :param ObservedMatrix x: The observed matrix
    :param ModelParams params: The true parameters
    :return: The ``(n1, nq)`` row marginals and ``(n2, nl)`` column marginals
    :rtype: tuple[numpy.ndarray, numpy.ndarray]

    :raises EnumerationError: The kind involves value-dependent effects or the number
      of configurations exceeds :const:`ENUMERATION_CAP`
    """
    reason = _enumeration_refusal(x, params)

    if reason:
        raise EnumerationError(reason)

    ones, zeros, _ = x.indicators()
    rows = np.array(list(itertools.product(range(params.nq), repeat=x.n_rows)))
    cols = np.array(list(itertools.product(range(params.nl), repeat=x.n_cols)))
    log_pi = np.log(params.pi)
    log_1mpi = np.log1p(-params.pi)

    by_rows = np.einsum("ij,ril->rjl", ones, log_pi[rows]) + np.einsum(
        "ij,ril->rjl", zeros, log_1mpi[rows]
    )
    col_one_hot = np.eye(params.nl)[cols]
    log_joint = (
        np.einsum("rjl,cjl->rc", by_rows, col_one_hot)
        + np.log(params.alpha_rows)[rows].sum(axis=1)[:, None]
        + np.log(params.alpha_cols)[cols].sum(axis=1)[None, :]
    )
    weights = np.exp(log_joint - logsumexp(log_joint))

    tau_rows = np.einsum("r,riq->iq", weights.sum(axis=1), np.eye(params.nq)[rows])
    tau_cols = np.einsum("c,cjl->jl", weights.sum(axis=0), col_one_hot)

    return tau_rows, tau_cols


def _state_from_labels(
    x: ObservedMatrix, params: ModelParams, row_labels, col_labels
) -> VariationalState:
    latents = {}

    for block in active_blocks(params):
        size = x.n_rows if block in ("a", "b") else x.n_cols
        latents[f"nu_{block}"] = np.zeros(size)
        latents[f"rho_{block}"] = np.full(size, params.variance(block))

    return VariationalState(
        tau_rows=smoothed_tau(np.asarray(row_labels), params.nq),
        tau_cols=smoothed_tau(np.asarray(col_labels), params.nl),
        **latents,
    )


def _prior_state(x: ObservedMatrix, params: ModelParams) -> VariationalState:
    state = _state_from_labels(
        x, params, np.zeros(x.n_rows, dtype=int), np.zeros(x.n_cols, dtype=int)
    )

    return attr.evolve(
        state,
        tau_rows=np.tile(params.alpha_rows, (x.n_rows, 1)),
        tau_cols=np.tile(params.alpha_cols, (x.n_cols, 1)),
    )


def _start_state(
    x: ObservedMatrix, params: ModelParams, labels: Optional[Labels], seed: SeedLike
) -> VariationalState:
    if labels is not None:
        return _state_from_labels(x, params, *labels)

    try:
        row_labels, col_labels = spectral_coclustering(x, params.nq, params.nl, seed)
    except DegenerateMatrixError:
        return _prior_state(x, params)

    if math.factorial(params.nq) * math.factorial(params.nl) > PERMUTATION_CAP:
        return _state_from_labels(x, params, row_labels, col_labels)

    best, best_value = None, -np.inf

    for row_perm in itertools.permutations(range(params.nq)):
        for col_perm in itertools.permutations(range(params.nl)):
            state = _state_from_labels(
                x,
                params,
                np.asarray(row_perm)[row_labels],
                np.asarray(col_perm)[col_labels],
            )
            value = evaluate(x, state, params, gradient=False).elbo

            if value > best_value:
                best, best_value = state, value

    return best


def estimate_risk(
    x: ObservedMatrix,
    true_params: ModelParams,
    config: Optional[RiskConfig] = None,
    labels: Optional[Labels] = None,
    seed: SeedLike = 0,
) -> RiskEstimate:
    """Estimates the conditional Bayes risk of the co-clustering of `x`.

    :param ObservedMatrix x: The observed matrix
    :param ModelParams true_params: The parameters that generated `x`
    :param config: The risk configuration, defaults to :const:`None` (defaults)
    :type config: RiskConfig, optional
    :param labels: Row and column labels starting the E-step, defaults to
      :const:`None` (spectral labels under their best class permutation)
    :type labels: tuple[numpy.ndarray, numpy.ndarray], optional
    :param seed: Seed of the spectral labels, defaults to 0
    :type seed: int, optional
    :rtype: RiskEstimate

    :raises EnumerationError: The exact method is requested but not admissible
    """
    config = config or RiskConfig()
    method = config.risk_method

    if method == "auto":
        method = "variational" if _enumeration_refusal(x, true_params) else "exact"

    if x.is_all_missing():
        # No observed cell: the labels keep their prior whatever the mask model.
        prior = _prior_state(x, true_params)
        tau_rows, tau_cols = prior.tau_rows, prior.tau_cols
        converged = True
    elif method == "exact":
        tau_rows, tau_cols = exact_posterior_marginals(x, true_params)
        converged = True
    else:
        start = _start_state(x, true_params, labels, seed)
        gamma, _, converged = ve_step_status(x, true_params, start, config.fit_config())
        tau_rows, tau_cols = gamma.tau_rows, gamma.tau_cols

        if not converged:
            logger.warning(
                "Risk E-step stopped before convergence, keeping best iterate"
            )

    risk, row_risk, col_risk = risk_from_marginals(tau_rows, tau_cols)
    logger.debug(f"Estimated {method} risk {risk:.5f} on a {x.shape} matrix")

    return RiskEstimate(risk, row_risk, col_risk, method, converged)


def conditional_bayes_risk(
    x: ObservedMatrix,
    true_params: ModelParams,
    config: Optional[RiskConfig] = None,
    labels: Optional[Labels] = None,
) -> float:
    """The conditional Bayes risk of the co-clustering, in [0, 1].

    See :func:`estimate_risk`.

    :rtype: float
    """
    return estimate_risk(x, true_params, config, labels).risk


def _probe(params: ModelParams, n_rows: int, n_cols: int, seed: int, config) -> float:
    sample = sample_lbm(params, n_rows, n_cols, seed)

    return conditional_bayes_risk(
        sample.x_observed, params, config, labels=(sample.row_labels, sample.col_labels)
    )


def median_risk(
    epsilon: float,
    n_rows: int,
    n_cols: int,
    mnar=DEFAULT_MNAR,
    seed: SeedLike = 0,
    config: Optional[RiskConfig] = None,
) -> float:
    """Median conditional Bayes risk of benchmark matrices simulated at `epsilon`.

    The matrices are seeded from `seed` alone, so successive calls at different
    :math:`\\epsilon` share their random numbers.

    :rtype: float
    """
    config = config or RiskConfig()
    params = make_benchmark_params(epsilon, mnar)
    risks = Parallel(n_jobs=resolve_n_jobs(config.n_jobs))(
        delayed(_probe)(params, n_rows, n_cols, s, config)
        for s in spawn_seeds(seed, config.calibration_seeds)
    )

    return float(np.median(risks))


def calibrate_epsilon(
    target_risk: float,
    n_rows: int,
    n_cols: int,
    mnar=DEFAULT_MNAR,
    seed: SeedLike = 0,
    tol: Optional[float] = None,
    config: Optional[RiskConfig] = None,
) -> float:
    """Finds the :math:`\\epsilon` whose benchmark matrices have a given risk.

    Bisection over :const:`EPSILON_BRACKET` on the median risk of
    ``config.calibration_seeds`` matrices, stopping as soon as the median lies within
    `tol` of `target_risk`. When the bisection cap is reached the closest probe is
    returned.

    :param float target_risk: The target conditional Bayes risk, in (0, 8/9)
    :param int n_rows: Number of rows of the simulated matrices
    :param int n_cols: Number of columns of the simulated matrices
    :param mnar: Propensity parameters, defaults to :const:`DEFAULT_MNAR`
    :param seed: Seed of the simulated matrices, defaults to 0
    :param tol: Tolerance on the median risk, defaults to :const:`None`
      (``config.calibration_tol``)
    :type tol: float, optional
    :param config: The risk configuration, defaults to :const:`None` (defaults)
    :type config: RiskConfig, optional
    :return: The calibrated :math:`\\epsilon`
    :rtype: float

    :raises CalibrationError: The target lies outside the risks reachable in the bracket
    """
    config = config or RiskConfig()
    tol = config.calibration_tol if tol is None else float(tol)
    low, high = EPSILON_BRACKET

    if not 0.0 < target_risk < MAX_TARGET_RISK:
        raise CalibrationError(target_risk, low, high)

    def measure(epsilon):
        risk = median_risk(epsilon, n_rows, n_cols, mnar, seed, config)
        logger.debug(f"Calibration probe epsilon = {epsilon:.6f}: risk = {risk:.5f}")
        probes.append((abs(risk - target_risk), epsilon, risk))
        return risk

    probes = []
    risk_low, risk_high = measure(low), measure(high)

    if target_risk < risk_low - tol or target_risk > risk_high + tol:
        raise CalibrationError(target_risk, low, high, risk_low, risk_high)

    for _ in range(config.max_bisections):
        gap, epsilon, risk = min(probes)

        if gap <= tol:
            logger.info(
                f"Calibrated epsilon = {epsilon:.6f} for risk {target_risk} "
                f"(median {risk:.5f})"
            )
            return epsilon

        middle = 0.5 * (low + high)

        if measure(middle) < target_risk:
            low = middle
        else:
            high = middle

    gap, epsilon, risk = min(probes)

    if gap > tol:
        logger.warning(
            f"Calibration stopped after {config.max_bisections} bisections: epsilon = "
            f"{epsilon:.6f} reaches risk {risk:.5f} for target {target_risk}"
        )

    return epsilon
