"""Sampling from the generative model and the benchmark configurations.

A sample is drawn in a fixed order (row labels, column labels, the four latent
vectors, the complete matrix and finally the mask) from a single
:class:`numpy.random.Generator`, so a seed fully determines the result.
"""
from typing import Optional, Tuple

import numpy as np
from attr import attrib, attrs, validators
from mnarlbm.logging import logger
from mnarlbm.model import CompleteSample, MissingnessKind, ModelParams, ObservedMatrix
from mnarlbm.model.exceptions import DomainError
from mnarlbm.utils import SeedLike
from scipy.special import expit

MnarEffects = Tuple[float, float, float, float, float]
"""Propensity parameters ``(mu, var_a, var_b, var_p, var_q)``."""

DEFAULT_MNAR: MnarEffects = (1.0, 1.0, 1.0, 1.0, 1.0)
"""Propensity parameters giving about 35% of missing values."""


def _as_effects(values) -> MnarEffects:
    effects = tuple(float(v) for v in values)

    if len(effects) != 5:
        raise DomainError("mnar", values, "5-tuples (mu, var_a, var_b, var_p, var_q)")

    return effects


def _check_epsilon(instance, attribute, value):
    if not 0.0 < value < 0.5:
        raise DomainError("epsilon", value, "(0, 0.5)")


@attrs(frozen=True)
class BenchmarkConfig:
    """A benchmark configuration of the simulated-data study.

    :param float epsilon: The difficulty parameter, in (0, 0.5)
    :param int n_rows: Number of rows
    :param int n_cols: Number of columns
    :param mnar: Propensity parameters, defaults to :const:`DEFAULT_MNAR`
    :type mnar: tuple[float, float, float, float, float]
    """

    epsilon: float = attrib(converter=float, validator=_check_epsilon)
    n_rows: int = attrib(converter=int, validator=validators.instance_of(int))
    n_cols: int = attrib(converter=int, validator=validators.instance_of(int))
    mnar: MnarEffects = attrib(default=DEFAULT_MNAR, converter=_as_effects)

    def params(self, kind: Optional[MissingnessKind] = None) -> ModelParams:
        """Returns the model parameters of this configuration."""
        return make_benchmark_params(self.epsilon, self.mnar, kind)


def make_benchmark_params(
    epsilon: float, mnar=DEFAULT_MNAR, kind: Optional[MissingnessKind] = None
) -> ModelParams:
    """Builds the three-by-three benchmark parameters.

    Both class proportions are uniform and the rows of :math:`\\pi` are
    :math:`(\\epsilon, \\epsilon, 1-\\epsilon)`,
    :math:`(\\epsilon, 1-\\epsilon, 1-\\epsilon)` and
    :math:`(1-\\epsilon, 1-\\epsilon, \\epsilon)`.

    :param float epsilon: The difficulty parameter, in (0, 0.5)
    :param mnar: Propensity parameters ``(mu, var_a, var_b, var_p, var_q)``, defaults
      to :const:`DEFAULT_MNAR`
    :type mnar: tuple[float, float, float, float, float]
    :param kind: Missingness kind of the result, defaults to :const:`None` (MNAR);
      variances of the blocks dropped by `kind` are set to zero
    :type kind: MissingnessKind, optional
    :return: The benchmark parameters
    :rtype: ModelParams

    :raises DomainError: `epsilon` lies outside (0, 0.5)
    """
    epsilon = float(epsilon)

    if not 0.0 < epsilon < 0.5:
        raise DomainError("epsilon", epsilon, "(0, 0.5)")

    mu, var_a, var_b, var_p, var_q = _as_effects(mnar)
    e, f = epsilon, 1.0 - epsilon
    params = ModelParams(
        kind=MissingnessKind.MNAR,
        alpha_rows=np.full(3, 1.0 / 3.0),
        alpha_cols=np.full(3, 1.0 / 3.0),
        pi=[[e, e, f], [e, f, f], [f, f, e]],
        mu=mu,
        var_a=var_a,
        var_b=var_b,
        var_p=var_p,
        var_q=var_q,
    )

    return params if kind is None else params.with_kind(kind)


def sample_lbm(
    params: ModelParams, n_rows: int, n_cols: int, seed: SeedLike
) -> CompleteSample:
    """Draws a complete sample from the generative model.

    Cells are observed with probability :math:`\\mathrm{logistic}(\\mu + A_i + P_j
    \\pm (B_i + Q_j))`, the sign being positive when :math:`X^c_{ij} = 1`.

    :param ModelParams params: The model parameters
    :param int n_rows: Number of rows :math:`n_1`
    :param int n_cols: Number of columns :math:`n_2`
    :param seed: Seed of the random stream
    :type seed: int or numpy.random.SeedSequence
    :return: The complete sample
    :rtype: CompleteSample

    :raises DomainError: A dimension is lower than one
    """
    if n_rows < 1:
        raise DomainError("n_rows", n_rows, "[1, +inf)")

    if n_cols < 1:
        raise DomainError("n_cols", n_cols, "[1, +inf)")

    rng = np.random.default_rng(seed)
    row_labels = rng.choice(params.nq, size=n_rows, p=params.alpha_rows)
    col_labels = rng.choice(params.nl, size=n_cols, p=params.alpha_cols)
    a = rng.normal(0.0, np.sqrt(params.var_a), size=n_rows)
    b = rng.normal(0.0, np.sqrt(params.var_b), size=n_rows)
    p = rng.normal(0.0, np.sqrt(params.var_p), size=n_cols)
    q = rng.normal(0.0, np.sqrt(params.var_q), size=n_cols)

    # zero-variance draws may come out as -0.0
    a, b, p, q = (v + 0.0 for v in (a, b, p, q))

    pi = params.pi[np.ix_(row_labels, col_labels)]
    x_complete = (rng.random((n_rows, n_cols)) < pi).astype(np.int8)
    sign = 2.0 * x_complete - 1.0
    propensity = params.mu + a[:, None] + p[None, :] + sign * (b[:, None] + q[None, :])
    mask = (rng.random((n_rows, n_cols)) < expit(propensity)).astype(np.int8)

    sample = CompleteSample(
        row_labels=row_labels,
        col_labels=col_labels,
        a=a,
        b=b,
        p=p,
        q=q,
        x_complete=x_complete,
        mask=mask,
        x_observed=ObservedMatrix.from_complete(x_complete, mask),
    )
    logger.debug(
        f"Sampled a {n_rows}x{n_cols} {params.kind.name} matrix with "
        f"{sample.x_observed.missing_rate():.3f} missing rate"
    )

    return sample


def shrink_sample(sample: CompleteSample, n_rows: int, n_cols: int) -> CompleteSample:
    """Keeps the leading `n_rows` rows and `n_cols` columns of a sample.

    :param CompleteSample sample: The sample to shrink
    :param int n_rows: Number of rows kept
    :param int n_cols: Number of columns kept
    :rtype: CompleteSample

    :raises DomainError: A requested dimension exceeds the sample or is lower than one
    """
    if not 1 <= n_rows <= sample.n_rows:
        raise DomainError("n_rows", n_rows, f"[1, {sample.n_rows}]")

    if not 1 <= n_cols <= sample.n_cols:
        raise DomainError("n_cols", n_cols, f"[1, {sample.n_cols}]")

    x_complete = sample.x_complete[:n_rows, :n_cols]
    mask = sample.mask[:n_rows, :n_cols]

    return CompleteSample(
        row_labels=sample.row_labels[:n_rows],
        col_labels=sample.col_labels[:n_cols],
        a=sample.a[:n_rows],
        b=sample.b[:n_rows],
        p=sample.p[:n_cols],
        q=sample.q[:n_cols],
        x_complete=x_complete,
        mask=mask,
        x_observed=ObservedMatrix.from_complete(x_complete, mask),
    )
