"""The variational EM loop.

Both half-steps maximize :math:`J` with L-BFGS-B in unconstrained coordinates:

- class memberships and proportions through a softmax whose first logit is fixed at 0,
- block probabilities through their logit, bounded to the clamp range of
  :const:`mnarlbm.model.types.PI_FLOOR`,
- posterior and prior variances through their logarithm.

A half-step keeps its starting point whenever the optimizer does not improve on it.
"""
from typing import Callable, List, Optional, Sequence, Tuple

import attr
import numpy as np
from joblib import Parallel, delayed
from mnarlbm.inference.criterion import active_blocks, evaluate
from mnarlbm.inference.exceptions import ClassCountError
from mnarlbm.inference.init import (
    init_from_labels,
    init_perturbed,
    init_random,
    init_spectral,
    spectral_coclustering,
)
from mnarlbm.inference.state import FitConfig, FitResult, VariationalState
from mnarlbm.logging import logger
from mnarlbm.model import MissingnessKind, ModelParams, ObservedMatrix
from mnarlbm.model.types import PI_FLOOR
from mnarlbm.utils import resolve_n_jobs, spawn_seeds
from scipy.optimize import minimize
from scipy.special import expit, logit, softmax

LOG_VAR_BOUNDS = (-25.0, 10.0)
PI_LOGIT_BOUNDS = (float(logit(PI_FLOOR)), float(logit(1.0 - PI_FLOOR)))

_TINY = 1e-300
_PENALTY = 1e300


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    full = np.concatenate([np.zeros((logits.shape[0], 1)), logits], axis=1)

    return softmax(full, axis=1)


def _free_logits(probs: np.ndarray) -> np.ndarray:
    logs = np.log(np.maximum(probs, _TINY))

    return logs[:, 1:] - logs[:, :1]


def _softmax_chain(probs: np.ndarray, grad: np.ndarray) -> np.ndarray:
    dz = probs * (grad - np.sum(probs * grad, axis=1, keepdims=True))

    return dz[:, 1:]


def _log_var(values: np.ndarray) -> np.ndarray:
    return np.clip(np.log(values), *LOG_VAR_BOUNDS)


@attr.s(frozen=True)
class GammaPacker:
    """Maps a :class:`VariationalState` to the flat vector optimized by the VE-step.

    The vector holds the free row logits, the free column logits, then the means and
    log-variances of every active block in canonical order.
    """

    template: VariationalState = attr.ib()
    blocks: Tuple[str, ...] = attr.ib()

    def pack(self, gamma: VariationalState) -> np.ndarray:
        parts = [
            _free_logits(gamma.tau_rows).ravel(),
            _free_logits(gamma.tau_cols).ravel(),
        ]

        for block in self.blocks:
            parts.append(gamma.mean(block))
            parts.append(_log_var(gamma.var(block)))

        return np.concatenate(parts)

    def unpack(self, vector: np.ndarray) -> VariationalState:
        t = self.template
        offset = 0

        def take(size):
            nonlocal offset
            chunk = vector[offset : offset + size]
            offset += size
            return chunk

        tau_rows = _softmax_rows(
            take(t.n_rows * (t.nq - 1)).reshape(t.n_rows, t.nq - 1)
        )
        tau_cols = _softmax_rows(
            take(t.n_cols * (t.nl - 1)).reshape(t.n_cols, t.nl - 1)
        )
        changes = {"tau_rows": tau_rows, "tau_cols": tau_cols}

        for block in self.blocks:
            size = t.n_rows if block in ("a", "b") else t.n_cols
            changes[f"nu_{block}"] = take(size)
            changes[f"rho_{block}"] = np.exp(take(size))

        return attr.evolve(t, **changes)

    def gradient(self, gamma: VariationalState, grad: dict) -> np.ndarray:
        parts = [
            _softmax_chain(gamma.tau_rows, grad["tau_rows"]).ravel(),
            _softmax_chain(gamma.tau_cols, grad["tau_cols"]).ravel(),
        ]

        for block in self.blocks:
            parts.append(grad[f"nu_{block}"])
            parts.append(gamma.var(block) * grad[f"rho_{block}"])

        return np.concatenate(parts)

    def bounds(self) -> List[Tuple[Optional[float], Optional[float]]]:
        t = self.template
        bounds = [(None, None)] * (t.n_rows * (t.nq - 1) + t.n_cols * (t.nl - 1))

        for block in self.blocks:
            size = t.n_rows if block in ("a", "b") else t.n_cols
            bounds += [(None, None)] * size + [LOG_VAR_BOUNDS] * size

        return bounds


@attr.s(frozen=True)
class ThetaPacker:
    """Maps :class:`ModelParams` to the flat vector optimized by the M-step.

    The vector holds the free logits of both class proportions, the logits of
    :math:`\\pi` in row-major order, :math:`\\mu`, then the log-variances of the active
    blocks.
    """

    template: ModelParams = attr.ib()
    blocks: Tuple[str, ...] = attr.ib()

    def pack(self, params: ModelParams) -> np.ndarray:
        return np.concatenate(
            [
                _free_logits(params.alpha_rows[None, :]).ravel(),
                _free_logits(params.alpha_cols[None, :]).ravel(),
                np.clip(logit(params.pi).ravel(), *PI_LOGIT_BOUNDS),
                [params.mu],
                [_log_var(params.variance(b)) for b in self.blocks],
            ]
        )

    def unpack(self, vector: np.ndarray) -> ModelParams:
        t = self.template
        nq, nl = t.nq, t.nl
        offset = 0

        def take(size):
            nonlocal offset
            chunk = vector[offset : offset + size]
            offset += size
            return chunk

        alpha_rows = _softmax_rows(take(nq - 1)[None, :])[0]
        alpha_cols = _softmax_rows(take(nl - 1)[None, :])[0]
        pi = expit(take(nq * nl)).reshape(nq, nl)
        mu = float(take(1)[0])
        variances = {f"var_{b}": float(np.exp(take(1)[0])) for b in self.blocks}

        return attr.evolve(
            t, alpha_rows=alpha_rows, alpha_cols=alpha_cols, pi=pi, mu=mu, **variances
        )

    def gradient(self, params: ModelParams, grad: dict) -> np.ndarray:
        return np.concatenate(
            [
                _softmax_chain(
                    params.alpha_rows[None, :], grad["alpha_rows"][None, :]
                )[0],
                _softmax_chain(
                    params.alpha_cols[None, :], grad["alpha_cols"][None, :]
                )[0],
                (params.pi * (1.0 - params.pi) * grad["pi"]).ravel(),
                [grad["mu"]],
                [params.variance(b) * grad[f"var_{b}"] for b in self.blocks],
            ]
        )

    def bounds(self) -> List[Tuple[Optional[float], Optional[float]]]:
        t = self.template

        return (
            [(None, None)] * (t.nq - 1 + t.nl - 1)
            + [PI_LOGIT_BOUNDS] * (t.nq * t.nl)
            + [(None, None)]
            + [LOG_VAR_BOUNDS] * len(self.blocks)
        )


def _quasi_newton(
    objective: Callable, start: np.ndarray, bounds, cfg: FitConfig
) -> Tuple[np.ndarray, float, bool]:
    """Minimizes `objective` with L-BFGS-B, never returning a worse point than
    `start`."""
    start_value, _ = objective(start)

    if start.size == 0:
        return start, start_value, True

    result = minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={
            "maxiter": cfg.max_inner_iters,
            "gtol": cfg.gradient_tol,
            "maxcor": cfg.history_size,
        },
    )

    if not (np.isfinite(result.fun) and result.fun <= start_value):
        logger.debug(f"L-BFGS-B did not improve on its start: {result.message}")
        return start, start_value, False

    return result.x, float(result.fun), bool(result.success)


def _guarded(evaluate_at: Callable[[np.ndarray], Tuple[float, np.ndarray]]) -> Callable:
    def objective(vector):
        try:
            value, grad = evaluate_at(vector)
        except (ValueError, FloatingPointError):
            return _PENALTY, np.zeros_like(vector)

        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            return _PENALTY, np.zeros_like(vector)

        return -value, -grad

    return objective


def ve_step_status(
    x: ObservedMatrix, params: ModelParams, gamma: VariationalState, cfg: FitConfig
) -> Tuple[VariationalState, float, bool]:
    """Runs a VE-step and returns the posterior, its criterion and whether the
    quasi-Newton solve converged."""
    packer = GammaPacker(gamma, active_blocks(params))

    def evaluate_at(vector):
        state = packer.unpack(vector)
        ev = evaluate(x, state, params, chunk_cells=cfg.chunk_cells)
        return ev.elbo, packer.gradient(state, ev.grad_gamma)

    vector, value, converged = _quasi_newton(
        _guarded(evaluate_at), packer.pack(gamma), packer.bounds(), cfg
    )
    before = evaluate(x, gamma, params, gradient=False).elbo
    result = packer.unpack(vector)
    after = evaluate(x, result, params, gradient=False).elbo

    if not after >= before:
        return gamma, before, False

    return result, after, converged


def ve_step(
    x: ObservedMatrix, params: ModelParams, gamma: VariationalState, cfg: FitConfig
) -> VariationalState:
    """Maximizes :math:`J` over the posterior with the parameters held fixed.

    :param ObservedMatrix x: The observed matrix
    :param ModelParams params: The fixed model parameters
    :param VariationalState gamma: The starting posterior
    :param FitConfig cfg: The engine configuration
    :return: A posterior whose criterion is at least that of `gamma`
    :rtype: VariationalState
    """
    return ve_step_status(x, params, gamma, cfg)[0]


def closed_form_params(gamma: VariationalState, params: ModelParams) -> ModelParams:
    """Applies the exact maximizers of the separable terms of :math:`J`.

    Class proportions become the mean memberships and the prior variance of every
    active block becomes :math:`\\sum (\\nu^2 + \\rho) / n`.

    :rtype: ModelParams
    """
    alpha_rows = np.maximum(gamma.tau_rows.mean(axis=0), 1e-12)
    alpha_cols = np.maximum(gamma.tau_cols.mean(axis=0), 1e-12)
    variances = {}

    for block in active_blocks(params):
        second_moment = float(np.mean(gamma.mean(block) ** 2 + gamma.var(block)))
        variances[f"var_{block}"] = float(
            np.clip(second_moment, *np.exp(LOG_VAR_BOUNDS))
        )

    return attr.evolve(
        params,
        alpha_rows=alpha_rows / alpha_rows.sum(),
        alpha_cols=alpha_cols / alpha_cols.sum(),
        **variances,
    )


def _m_step(
    x: ObservedMatrix, gamma: VariationalState, params: ModelParams, cfg: FitConfig
) -> Tuple[ModelParams, float, bool]:
    before = evaluate(x, gamma, params, gradient=False).elbo
    closed = closed_form_params(gamma, params)
    closed_value = evaluate(x, gamma, closed, gradient=False).elbo

    if closed_value >= before:
        params, before = closed, closed_value

    packer = ThetaPacker(params, active_blocks(params))

    def evaluate_at(vector):
        candidate = packer.unpack(vector)
        ev = evaluate(x, gamma, candidate, chunk_cells=cfg.chunk_cells)
        return ev.elbo, packer.gradient(candidate, ev.grad_theta)

    vector, _, converged = _quasi_newton(
        _guarded(evaluate_at), packer.pack(params), packer.bounds(), cfg
    )
    result = packer.unpack(vector)
    after = evaluate(x, gamma, result, gradient=False).elbo

    if not after >= before:
        return params, before, False

    return result, after, converged


def m_step(
    x: ObservedMatrix, gamma: VariationalState, params: ModelParams, cfg: FitConfig
) -> ModelParams:
    """Maximizes :math:`J` over the model parameters with the posterior held fixed.

    The separable terms are first set at their closed-form optimum, then L-BFGS-B
    refines the whole parameter vector.

    :param ObservedMatrix x: The observed matrix
    :param VariationalState gamma: The fixed posterior
    :param ModelParams params: The starting parameters
    :param FitConfig cfg: The engine configuration
    :return: Parameters whose criterion is at least that of `params`
    :rtype: ModelParams
    """
    return _m_step(x, gamma, params, cfg)[0]


@attr.s
class _Run:
    params: ModelParams = attr.ib()
    gamma: VariationalState = attr.ib()
    trace: List[float] = attr.ib()
    converged: bool = attr.ib(default=False)
    n_iters: int = attr.ib(default=0)


def _run_vem(x: ObservedMatrix, run: _Run, cfg: FitConfig, max_iters: int) -> _Run:
    previous = run.trace[-1]

    for _ in range(max_iters):
        run.gamma, value, _ = ve_step_status(x, run.params, run.gamma, cfg)
        run.trace.append(value)
        logger.debug(f"VE-step {run.n_iters + 1}: J = {value!r}")

        run.params, value, _ = _m_step(x, run.gamma, run.params, cfg)
        run.trace.append(value)
        logger.debug(f"M-step {run.n_iters + 1}: J = {value!r}")
        run.n_iters += 1

        if abs(value - previous) <= cfg.elbo_rel_tol * max(abs(previous), _TINY):
            run.converged = True
            break

        previous = value

    return run


def check_class_counts(x: ObservedMatrix, nq: int, nl: int) -> None:
    """Raises :class:`ClassCountError` unless ``1 <= nq <= n1`` and
    ``1 <= nl <= n2``."""
    if not 1 <= nq <= x.n_rows:
        raise ClassCountError("rows", nq, x.n_rows)

    if not 1 <= nl <= x.n_cols:
        raise ClassCountError("columns", nl, x.n_cols)


def _finish(
    x: ObservedMatrix, run: _Run, cfg: FitConfig, degenerate: bool
) -> FitResult:
    final = evaluate(
        x, run.gamma, run.params, gradient=False, chunk_cells=cfg.chunk_cells
    )
    result = FitResult(
        params=run.params,
        varstate=run.gamma,
        elbo_trace=run.trace,
        converged=run.converged,
        n_iters=run.n_iters,
        seed=cfg.seed,
        degenerate=degenerate,
        n_clamped=final.n_clamped,
        entropy=final.terms["entropy"],
    )

    if final.n_clamped:
        logger.warning(
            f"{result.fit_ref}: f_NA argument clamped on {final.n_clamped} cell-block "
            "pairs"
        )

    if not run.converged:
        logger.warning(
            f"{result.fit_ref}: no convergence after {run.n_iters} iterations "
            f"(J = {result.elbo!r})"
        )

    logger.info(
        f"Fitted {result.fit_ref} in {run.n_iters} iterations: J = {result.elbo!r}"
    )

    return result


def fit(
    x: ObservedMatrix,
    nq: int,
    nl: int,
    kind: MissingnessKind,
    cfg: Optional[FitConfig] = None,
    init: Optional[Tuple[ModelParams, VariationalState]] = None,
) -> FitResult:
    """Fits the model by variational EM from a spectral initialization.

    The loop alternates :func:`ve_step` and :func:`m_step` until the relative change
    of :math:`J` over one iteration falls under ``cfg.elbo_rel_tol`` or
    ``cfg.max_vem_iters`` iterations have run. A matrix without any observed cell is
    fitted from a random initialization and flagged degenerate.

    :param ObservedMatrix x: The observed matrix
    :param int nq: Number of row classes
    :param int nl: Number of column classes
    :param kind: The missingness kind
    :type kind: MissingnessKind or str
    :param cfg: The engine configuration, defaults to :const:`None` (defaults)
    :type cfg: FitConfig, optional
    :param init: A starting ``(params, gamma)``, defaults to :const:`None`
    :type init: tuple[ModelParams, VariationalState], optional
    :rtype: FitResult

    :raises ClassCountError: A class count exceeds the matching dimension
    """
    kind = MissingnessKind.parse(kind)
    cfg = cfg or FitConfig()
    check_class_counts(x, nq, nl)
    degenerate = x.is_all_missing()

    if init is not None:
        params, gamma = init
    elif degenerate:
        logger.warning(f"Matrix of shape {x.shape} has no observed cell")
        params, gamma = init_random(x, nq, nl, cfg.seed, kind)
    else:
        params, gamma = init_spectral(x, nq, nl, cfg.seed, kind)

    start = evaluate(x, gamma, params, gradient=False, chunk_cells=cfg.chunk_cells)
    run = _run_vem(x, _Run(params, gamma, [start.elbo]), cfg, cfg.max_vem_iters)

    return _finish(x, run, cfg, degenerate)


def _candidate_inits(
    x: ObservedMatrix, nq: int, nl: int, kind: MissingnessKind, cfg: FitConfig
) -> List[Tuple[ModelParams, VariationalState]]:
    seeds = spawn_seeds(cfg.seed, cfg.n_inits)

    if x.is_all_missing():
        return [init_random(x, nq, nl, s, kind) for s in seeds]

    row_labels, col_labels = spectral_coclustering(x, nq, nl, cfg.seed)
    inits = [init_from_labels(x, row_labels, col_labels, nq, nl, cfg.seed, kind)]

    for k, s in enumerate(seeds[1:], start=1):
        if k % 2:
            inits.append(init_perturbed(x, row_labels, col_labels, nq, nl, s, kind))
        else:
            inits.append(init_random(x, nq, nl, s, kind))

    return inits


def _warmup(
    x: ObservedMatrix, params: ModelParams, gamma: VariationalState, cfg: FitConfig
) -> _Run:
    start = evaluate(x, gamma, params, gradient=False, chunk_cells=cfg.chunk_cells)

    return _run_vem(
        x,
        _Run(params, gamma, [start.elbo]),
        cfg,
        min(cfg.warmup_iters, cfg.max_vem_iters),
    )


def best_candidate(values: Sequence[float]) -> int:
    """Index of the highest criterion, the lowest index winning ties."""
    return int(np.argmax(np.asarray(values, dtype=float)))


def multi_start_fit(
    x: ObservedMatrix,
    nq: int,
    nl: int,
    kind: MissingnessKind,
    cfg: Optional[FitConfig] = None,
) -> FitResult:
    """Fits the model from several starting points.

    Candidates are the spectral initialization and ``cfg.n_inits - 1`` alternately
    perturbed-spectral and random initializations. Each runs ``cfg.warmup_iters`` VEM
    iterations, then the candidate with the highest :math:`J` is continued until
    convergence. With a single candidate this is :func:`fit`.

    :param ObservedMatrix x: The observed matrix
    :param int nq: Number of row classes
    :param int nl: Number of column classes
    :param kind: The missingness kind
    :type kind: MissingnessKind or str
    :param cfg: The engine configuration, defaults to :const:`None` (defaults)
    :type cfg: FitConfig, optional
    :rtype: FitResult

    :raises ClassCountError: A class count exceeds the matching dimension
    """
    kind = MissingnessKind.parse(kind)
    cfg = cfg or FitConfig()

    if cfg.n_inits == 1:
        return fit(x, nq, nl, kind, cfg)

    check_class_counts(x, nq, nl)
    inits = _candidate_inits(x, nq, nl, kind, cfg)
    runs = Parallel(n_jobs=resolve_n_jobs(cfg.n_jobs))(
        delayed(_warmup)(x, params, gamma, cfg) for params, gamma in inits
    )
    winner = best_candidate([run.trace[-1] for run in runs])
    run = runs[winner]
    logger.info(
        f"Continuing candidate {winner} of {len(runs)} for {kind.value}-{nq}x{nl}: "
        f"J = {run.trace[-1]!r}"
    )

    if not run.converged:
        run = _run_vem(x, run, cfg, cfg.max_vem_iters - run.n_iters)

    return _finish(x, run, cfg, x.is_all_missing())

