"""The variational criterion :math:`J(\\gamma, \\theta)` and its analytic gradient.

The expectations of the cell log-probabilities under the mean-field posterior use a
second-order delta method around the posterior means. With
:math:`x = A_i + P_j` and :math:`y = B_i + Q_j`, the three cell functions are

- :math:`f_1(x, y) = \\log \\pi + \\log \\mathrm{logistic}(\\mu + x + y)`
- :math:`f_0(x, y) = \\log (1 - \\pi) + \\log \\mathrm{logistic}(\\mu + x - y)`
- :math:`f_{NA}(x, y) = \\log (1 - \\pi\\, \\mathrm{logistic}(\\mu + x + y) -
  (1 - \\pi)\\, \\mathrm{logistic}(\\mu + x - y))`

and :math:`E[f] \\approx f(m) + \\frac{1}{2} v_x \\partial_{xx} f(m) + \\frac{1}{2} v_y
\\partial_{yy} f(m)`.

Only the missing cells depend on :math:`\\pi` inside the logarithm. Observed cells
split into a block term contracted against :math:`\\tau^1 \\tau^2` and a block-free
term, while missing cells are streamed over chunks of rows on a
``(rows, columns, nq, nl)`` grid. Chunks are processed in order, so the reductions are
reproducible bit for bit.
"""
import math
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from attr import attrib, attrs
from mnarlbm.inference.state import VariationalState
from mnarlbm.logging import logger
from mnarlbm.model import ModelParams, ObservedMatrix
from mnarlbm.model.exceptions import ContractError, DimensionMismatchError, DomainError
from scipy.special import entr, expit, log_expit

NA_FLOOR = 1e-300
"""Floor of the argument of the logarithm of :math:`f_{NA}`."""

LOG_2PI = math.log(2.0 * math.pi)

_TINY = 1e-300

DEFAULT_CHUNK_CELLS = 2 ** 21

TERM_NAMES = ("entropy", "rows", "cols", "a", "b", "p", "q", "cells")


def _moments(u):
    s = expit(u)
    d = s * (1.0 - s)
    w = 1.0 - 2.0 * s
    e = d * w
    t = d * w * w - 2.0 * d * d

    return s, d, e, t


def _observed_expectation(u, v):
    """Delta expectation of :math:`\\log \\mathrm{logistic}(u)` with total variance `v`,
    and its derivatives with respect to `u` and to each variance."""
    s, d, e, _ = _moments(u)

    return log_expit(u) - 0.5 * v * d, (1.0 - s) - 0.5 * v * e, -0.5 * d


def _na_expectation(pi, u1, u0, vx, vy, derivatives: bool = False):
    a = pi
    b = 1.0 - pi
    s1, d1, e1, t1 = _moments(u1)
    s0, d0, e0, t0 = _moments(u0)

    g = a * expit(-u1) + b * expit(-u0)
    clamped = g < NA_FLOOR
    g = np.maximum(g, NA_FLOOR)

    ix = (-a * d1 - b * d0) / g
    iy = (-a * d1 + b * d0) / g
    ixx = (-a * e1 - b * e0) / g
    f = ixx - ix * ix
    h = ixx - iy * iy
    k = np.where(clamped, math.log(NA_FLOOR), np.log(g) + 0.5 * vx * f + 0.5 * vy * h)
    out = {"K": k, "n_clamped": int(np.count_nonzero(clamped))}

    if not derivatives:
        return out

    ixy = (-a * e1 + b * e0) / g
    ixxx = (-a * t1 - b * t0) / g
    ixxy = (-a * t1 + b * t0) / g
    fx = ixxx - 3.0 * ix * ixx + 2.0 * ix ** 3
    fy = ixxy - ixx * iy - 2.0 * ix * ixy + 2.0 * ix * ix * iy
    hx = ixxx - ixx * ix - 2.0 * iy * ixy + 2.0 * iy * iy * ix
    hy = ixxy - 3.0 * iy * ixx + 2.0 * iy ** 3

    ip = (s0 - s1) / g
    ixp = (d0 - d1) / g
    iyp = (-d1 - d0) / g
    ixxp = (e0 - e1) / g
    fp = ixxp - ixx * ip - 2.0 * ix * ixp + 2.0 * ix * ix * ip
    hp = ixxp - ixx * ip - 2.0 * iy * iyp + 2.0 * iy * iy * ip

    def guarded(values):
        return np.where(clamped, 0.0, values)

    out.update(
        Kx=guarded(ix + 0.5 * vx * fx + 0.5 * vy * hx),
        Ky=guarded(iy + 0.5 * vx * fy + 0.5 * vy * hy),
        Kvx=guarded(0.5 * f),
        Kvy=guarded(0.5 * h),
        Kp=guarded(ip + 0.5 * vx * fp + 0.5 * vy * hp),
    )

    return out


_CELL_FUNCTIONS = ("f0", "f1", "fNA")


def delta_expectation(
    kind: str,
    pi_ql: float,
    mu: float,
    mean_x: float,
    var_x: float,
    mean_y: float,
    var_y: float,
) -> float:
    """Second-order delta-method expectation of a cell log-probability.

    :param str kind: One of ``f0``, ``f1`` and ``fNA``
    :param float pi_ql: The block probability, in (0, 1)
    :param float mu: The global propensity
    :param float mean_x: Posterior mean of :math:`A_i + P_j`
    :param float var_x: Posterior variance of :math:`A_i + P_j`
    :param float mean_y: Posterior mean of :math:`B_i + Q_j`
    :param float var_y: Posterior variance of :math:`B_i + Q_j`
    :return: The approximated expectation
    :rtype: float

    :raises DomainError: An argument is outside its domain
    """
    if kind not in _CELL_FUNCTIONS:
        raise DomainError("kind", kind, "{f0, f1, fNA}")

    if not 0.0 < pi_ql < 1.0:
        raise DomainError("pi_ql", pi_ql, "(0, 1)")

    for name, value in (("var_x", var_x), ("var_y", var_y)):
        if not (np.isfinite(value) and value >= 0.0):
            raise DomainError(name, value, "[0, +inf)")

    for name, value in (("mu", mu), ("mean_x", mean_x), ("mean_y", mean_y)):
        if not np.isfinite(value):
            raise DomainError(name, value, "the finite reals")

    u1 = mu + mean_x + mean_y
    u0 = mu + mean_x - mean_y

    if kind == "f1":
        return math.log(pi_ql) + float(_observed_expectation(u1, var_x + var_y)[0])

    if kind == "f0":
        return math.log1p(-pi_ql) + float(_observed_expectation(u0, var_x + var_y)[0])

    out = _na_expectation(pi_ql, u1, u0, var_x, var_y)

    if out["n_clamped"]:
        logger.warning(f"f_NA argument clamped at {NA_FLOOR} for pi = {pi_ql!r}")

    return float(out["K"])


def active_blocks(params: ModelParams) -> Tuple[str, ...]:
    """The latent blocks entering the criterion: those of the kind with a positive
    prior variance."""
    return tuple(b for b in params.kind.latent_blocks if params.variance(b) > 0.0)


def entropy(gamma: VariationalState, blocks: Optional[Tuple[str, ...]] = None) -> float:
    """Entropy of the mean-field posterior.

    :param VariationalState gamma: The posterior
    :param blocks: Latent blocks taken into account, defaults to :const:`None` (all the
      blocks present in `gamma`)
    :type blocks: tuple[str, ...], optional
    :return: :math:`-\\sum \\tau \\log \\tau + \\frac{1}{2} \\sum \\log (2 \\pi e \\rho)`
    :rtype: float
    """
    blocks = gamma.blocks if blocks is None else blocks
    value = float(entr(gamma.tau_rows).sum() + entr(gamma.tau_cols).sum())

    for block in blocks:
        value += 0.5 * float(np.sum(LOG_2PI + 1.0 + np.log(gamma.var(block))))

    return value


@attrs(frozen=True, eq=False)
class ElboEvaluation:
    """The criterion at a point, with its gradient in natural coordinates.

    Iterating over an evaluation yields ``(elbo, grad_gamma, grad_theta)``.

    :ivar float elbo: The criterion :math:`J`
    :ivar terms: The named terms summing to :attr:`elbo`
    :vartype terms: dict[str, float]
    :ivar grad_gamma: Derivatives with respect to ``tau_rows``, ``tau_cols`` and the
      ``nu_*``/``rho_*`` vectors of the active blocks
    :vartype grad_gamma: dict[str, numpy.ndarray] or None
    :ivar grad_theta: Derivatives with respect to ``alpha_rows``, ``alpha_cols``,
      ``pi``, ``mu`` and the ``var_*`` of the active blocks
    :vartype grad_theta: dict or None
    :ivar int n_clamped: Number of missing-cell guard activations
    """

    elbo: float = attrib()
    terms: Dict[str, float] = attrib()
    grad_gamma: Optional[Dict[str, np.ndarray]] = attrib(default=None)
    grad_theta: Optional[Dict[str, object]] = attrib(default=None)
    n_clamped: int = attrib(default=0)

    def __iter__(self) -> Iterator:
        return iter((self.elbo, self.grad_gamma, self.grad_theta))


def _check_inputs(x: ObservedMatrix, gamma: VariationalState, params: ModelParams):
    if (gamma.n_rows, gamma.n_cols) != x.shape:
        raise DimensionMismatchError("posterior", x.shape, (gamma.n_rows, gamma.n_cols))

    if (gamma.nq, gamma.nl) != (params.nq, params.nl):
        raise DimensionMismatchError(
            "classes", (params.nq, params.nl), (gamma.nq, gamma.nl)
        )

    for block in active_blocks(params):
        if gamma.mean(block) is None:
            raise ContractError(
                f"latent block '{block}' is required by {params.kind.name} but absent "
                "from the posterior"
            )


def evaluate(
    x: ObservedMatrix,
    gamma: VariationalState,
    params: ModelParams,
    gradient: bool = True,
    chunk_cells: int = DEFAULT_CHUNK_CELLS,
) -> ElboEvaluation:
    """Evaluates the criterion and, optionally, its gradient.

    :param ObservedMatrix x: The observed matrix
    :param VariationalState gamma: The posterior
    :param ModelParams params: The model parameters
    :param gradient: Whether to compute the gradient, defaults to :const:`True`
    :type gradient: bool, optional
    :param chunk_cells: Bound on the size of the streamed missing-cell grids
    :type chunk_cells: int, optional
    :rtype: ElboEvaluation

    :raises ContractError: The inputs are inconsistent
    """
    _check_inputs(x, gamma, params)

    n1, n2 = x.shape
    nq, nl = params.nq, params.nl
    blocks = active_blocks(params)
    ones, zeros, missing = x.indicators()
    tau1, tau2 = gamma.tau_rows, gamma.tau_cols

    def moments(block, size):
        if block in blocks:
            return gamma.mean(block), gamma.var(block)

        return np.zeros(size), np.zeros(size)

    nu_a, rho_a = moments("a", n1)
    nu_b, rho_b = moments("b", n1)
    nu_p, rho_p = moments("p", n2)
    nu_q, rho_q = moments("q", n2)

    mx = params.mu + nu_a[:, None] + nu_p[None, :]
    my = nu_b[:, None] + nu_q[None, :]
    vx = rho_a[:, None] + rho_p[None, :]
    vy = rho_b[:, None] + rho_q[None, :]
    u1 = mx + my
    u0 = mx - my

    # -- Observed cells --------------------------------------------------------------
    h1, h1u, h1v = _observed_expectation(u1, vx + vy)
    h0, h0u, h0v = _observed_expectation(u0, vx + vy)
    log_pi = np.log(params.pi)
    log_1mpi = np.log1p(-params.pi)
    c1 = tau1.T @ ones @ tau2
    c0 = tau1.T @ zeros @ tau2
    cells = float(
        np.sum(c1 * log_pi)
        + np.sum(c0 * log_1mpi)
        + np.sum(ones * h1)
        + np.sum(zeros * h0)
    )

    if gradient:
        dx = ones * h1u + zeros * h0u
        dy = ones * h1u - zeros * h0u
        dvx = ones * h1v + zeros * h0v
        dvy = dvx.copy()
        dtau1 = ones @ tau2 @ log_pi.T + zeros @ tau2 @ log_1mpi.T
        dtau2 = ones.T @ tau1 @ log_pi + zeros.T @ tau1 @ log_1mpi
        dpi = c1 / params.pi - c0 / (1.0 - params.pi)

    # -- Missing cells ---------------------------------------------------------------
    n_clamped = 0

    if "b" in blocks or "q" in blocks:
        step = max(1, chunk_cells // max(1, n2 * nq * nl))
        pi4 = params.pi[None, None, :, :]

        for start in range(0, n1, step):
            rows = slice(start, min(start + step, n1))
            out = _na_expectation(
                pi4,
                u1[rows, :, None, None],
                u0[rows, :, None, None],
                vx[rows, :, None, None],
                vy[rows, :, None, None],
                derivatives=gradient,
            )
            n_clamped += out["n_clamped"]
            na = missing[rows, :, None, None]
            w = na * tau1[rows, None, :, None] * tau2[None, :, None, :]
            cells += float(np.sum(w * out["K"]))

            if gradient:
                dx[rows] += np.sum(w * out["Kx"], axis=(2, 3))
                dy[rows] += np.sum(w * out["Ky"], axis=(2, 3))
                dvx[rows] += np.sum(w * out["Kvx"], axis=(2, 3))
                dvy[rows] += np.sum(w * out["Kvy"], axis=(2, 3))
                dpi += np.sum(w * out["Kp"], axis=(0, 1))
                dtau1[rows] += np.sum(
                    na * tau2[None, :, None, :] * out["K"], axis=(1, 3)
                )
                dtau2 += np.sum(na * tau1[rows, None, :, None] * out["K"], axis=(0, 2))
    else:
        # without B and Q, f_NA is log logistic(-u) whatever the block
        s, d, e, _ = _moments(u1)
        cells += float(np.sum(missing * (log_expit(-u1) - 0.5 * vx * d)))

        if gradient:
            dx += missing * (-s - 0.5 * vx * e)
            dvx += missing * (-0.5 * d)

    # -- Labels, latent priors and entropy -------------------------------------------
    log_alpha1 = np.log(params.alpha_rows)
    log_alpha2 = np.log(params.alpha_cols)
    terms = {
        "entropy": entropy(gamma, blocks),
        "rows": float(np.sum(tau1 @ log_alpha1)),
        "cols": float(np.sum(tau2 @ log_alpha2)),
        "a": 0.0,
        "b": 0.0,
        "p": 0.0,
        "q": 0.0,
        "cells": cells,
    }

    for block in blocks:
        nu, rho, var = gamma.mean(block), gamma.var(block), params.variance(block)
        terms[block] = float(
            -0.5 * nu.size * (LOG_2PI + math.log(var))
            - np.sum(nu * nu + rho) / (2.0 * var)
        )

    value = float(sum(terms[name] for name in TERM_NAMES))

    if not gradient:
        return ElboEvaluation(elbo=value, terms=terms, n_clamped=n_clamped)

    grad_gamma = {
        "tau_rows": dtau1 + log_alpha1[None, :] - np.log(np.maximum(tau1, _TINY)) - 1.0,
        "tau_cols": dtau2 + log_alpha2[None, :] - np.log(np.maximum(tau2, _TINY)) - 1.0,
    }
    grad_theta = {
        "alpha_rows": tau1.sum(axis=0) / params.alpha_rows,
        "alpha_cols": tau2.sum(axis=0) / params.alpha_cols,
        "pi": dpi,
        "mu": float(np.sum(dx)),
    }
    data_grads = {
        "a": (dx.sum(axis=1), dvx.sum(axis=1)),
        "b": (dy.sum(axis=1), dvy.sum(axis=1)),
        "p": (dx.sum(axis=0), dvx.sum(axis=0)),
        "q": (dy.sum(axis=0), dvy.sum(axis=0)),
    }

    for block in blocks:
        nu, rho, var = gamma.mean(block), gamma.var(block), params.variance(block)
        dnu, drho = data_grads[block]
        grad_gamma[f"nu_{block}"] = dnu - nu / var
        grad_gamma[f"rho_{block}"] = drho - 0.5 / var + 0.5 / rho
        grad_theta[f"var_{block}"] = float(
            -0.5 * nu.size / var + np.sum(nu * nu + rho) / (2.0 * var * var)
        )

    return ElboEvaluation(
        elbo=value,
        terms=terms,
        grad_gamma=grad_gamma,
        grad_theta=grad_theta,
        n_clamped=n_clamped,
    )


def elbo_terms(
    x: ObservedMatrix, gamma: VariationalState, params: ModelParams
) -> Dict[str, float]:
    """Returns the named terms of the criterion.

    The keys are ``entropy``, ``rows``, ``cols``, ``a``, ``b``, ``p``, ``q`` and
    ``cells``; Gaussian terms of inactive blocks are zero.

    :rtype: dict[str, float]
    """
    return evaluate(x, gamma, params, gradient=False).terms


def elbo(x: ObservedMatrix, gamma: VariationalState, params: ModelParams) -> float:
    """The variational criterion :math:`J(\\gamma, \\theta)`.

    :param ObservedMatrix x: The observed matrix
    :param VariationalState gamma: The posterior
    :param ModelParams params: The model parameters
    :return: The entropy of `gamma` plus the expected complete log-likelihood
    :rtype: float

    :raises ContractError: The inputs are inconsistent
    """
    result = evaluate(x, gamma, params, gradient=False)

    if result.n_clamped:
        logger.debug(f"f_NA argument clamped on {result.n_clamped} cell-block pairs")

    return result.elbo


def elbo_and_gradient(
    x: ObservedMatrix,
    gamma: VariationalState,
    params: ModelParams,
    chunk_cells: int = DEFAULT_CHUNK_CELLS,
) -> ElboEvaluation:
    """The criterion with its gradient with respect to :math:`\\gamma` and
    :math:`\\theta`, in natural coordinates.

    :rtype: ElboEvaluation
    """
    return evaluate(x, gamma, params, gradient=True, chunk_cells=chunk_cells)
