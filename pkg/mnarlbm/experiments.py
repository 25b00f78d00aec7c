"""Desk-scale protocols of the simulated-data study.

Every protocol simulates benchmark matrices, fits them and returns flat records, one
per replicate and condition, ready to be written as CSV or plotted. Replicates are
seeded from ``cfg.seed`` through :func:`mnarlbm.utils.spawn_seeds` and run in parallel
over ``cfg.n_jobs`` workers; the records come back in replicate order whatever the
number of workers.
"""
import math
from typing import Any, Callable, Dict, List, Optional, Sequence

import attr
from joblib import Parallel, delayed
from mnarlbm.inference import FitConfig, multi_start_fit
from mnarlbm.logging import logger
from mnarlbm.metrics import align_labels, l_item, latent_mse, map_assignments
from mnarlbm.metrics import param_max_error
from mnarlbm.metrics.classification import assignment_from_sample
from mnarlbm.model import CompleteSample, MissingnessKind, ModelParams
from mnarlbm.selection import SelectionConfig, icl, select_model
from mnarlbm.simulation import (
    DEFAULT_MNAR,
    RiskConfig,
    estimate_risk,
    make_benchmark_params,
    sample_lbm,
    shrink_sample,
)
from mnarlbm.utils import resolve_n_jobs, spawn_seeds

Record = Dict[str, Any]

BENCHMARK_CLASSES = 3
"""Row and column class counts of the benchmark configurations."""

EXPERIMENTS = ("size", "nmar-effect", "recovery", "class-count")


def _replicates(
    work: Callable[[int, int, FitConfig], List[Record]],
    n_replicates: int,
    cfg: FitConfig,
) -> List[Record]:
    seeds = spawn_seeds(cfg.seed, n_replicates)
    n_jobs = resolve_n_jobs(cfg.n_jobs)
    inner = attr.evolve(cfg, n_jobs=1) if n_jobs > 1 else cfg
    batches = Parallel(n_jobs=n_jobs)(
        delayed(work)(r, s, inner) for r, s in enumerate(seeds)
    )

    return [record for batch in batches for record in batch]


def _item_loss(sample: CompleteSample, fit) -> Record:
    loss = l_item(
        assignment_from_sample(sample),
        map_assignments(fit.varstate),
        fit.nq,
        fit.nl,
    )

    return {"l_item": loss.value, "row_error": loss.row, "col_error": loss.col}


def _fit(sample: CompleteSample, kind: MissingnessKind, seed: int, cfg: FitConfig):
    return multi_start_fit(
        sample.x_observed,
        BENCHMARK_CLASSES,
        BENCHMARK_CLASSES,
        kind,
        attr.evolve(cfg, seed=seed),
    )


def size_sweep(
    sizes: Sequence[int],
    epsilon: float,
    n_replicates: int,
    cfg: Optional[FitConfig] = None,
    mnar=DEFAULT_MNAR,
    risk_config: Optional[RiskConfig] = None,
) -> List[Record]:
    """Classification error and difficulty over matrix sizes.

    Each replicate simulates one matrix of the largest size and shrinks it to every
    size, keeping its leading rows and columns, so smaller matrices are sub-problems of
    the larger ones. Every shrunk matrix gets an estimate of its conditional Bayes risk
    and an MNAR fit.

    :param sizes: Square matrix sizes
    :type sizes: Sequence[int]
    :param float epsilon: The difficulty parameter
    :param int n_replicates: Number of simulated matrices
    :param cfg: The engine configuration, defaults to :const:`None` (defaults)
    :type cfg: FitConfig, optional
    :param mnar: Propensity parameters, defaults to :const:`DEFAULT_MNAR`
    :param risk_config: Configuration of the risk estimates, defaults to
      :const:`None` (defaults)
    :type risk_config: RiskConfig, optional
    :return: One record per replicate and size
    :rtype: list[dict[str, Any]]
    """
    cfg = cfg or FitConfig()
    risk_config = risk_config or RiskConfig()
    params = make_benchmark_params(epsilon, mnar)
    sizes = sorted(int(n) for n in sizes)

    def work(replicate: int, seed: int, inner: FitConfig) -> List[Record]:
        full = sample_lbm(params, sizes[-1], sizes[-1], seed)
        records = []

        for n in sizes:
            sample = shrink_sample(full, n, n)
            risk = estimate_risk(
                sample.x_observed,
                params,
                risk_config,
                labels=(sample.row_labels, sample.col_labels),
                seed=seed,
            )
            fit = _fit(sample, MissingnessKind.MNAR, seed, inner)
            records.append(
                {
                    "replicate": replicate,
                    "size": n,
                    "epsilon": float(epsilon),
                    "risk": risk.risk,
                    **_item_loss(sample, fit),
                    "converged": fit.converged,
                }
            )

        logger.info(f"Size sweep: replicate {replicate} done")

        return records

    return _replicates(work, n_replicates, cfg)


def nmar_effect_sweep(
    effects: Sequence[float],
    epsilon: float,
    size: int,
    n_replicates: int,
    cfg: Optional[FitConfig] = None,
    mnar=DEFAULT_MNAR,
) -> List[Record]:
    """MAR against MNAR fits as the value-dependent effects grow.

    For every value :math:`v` of `effects`, matrices are simulated with
    :math:`\\sigma^2_B = \\sigma^2_Q = v`, the other propensity parameters taken from
    `mnar`. Each matrix is fitted under both kinds; the record holds both item losses
    and the ICL difference, positive when MNAR is preferred. Replicate ``r`` uses the
    same seed at every level.

    :param effects: Values of :math:`\\sigma^2_B = \\sigma^2_Q`
    :type effects: Sequence[float]
    :param float epsilon: The difficulty parameter
    :param int size: Square matrix size
    :param int n_replicates: Number of simulated matrices per level
    :param cfg: The engine configuration, defaults to :const:`None` (defaults)
    :type cfg: FitConfig, optional
    :param mnar: Propensity parameters, defaults to :const:`DEFAULT_MNAR`
    :return: One record per replicate and level
    :rtype: list[dict[str, Any]]
    """
    cfg = cfg or FitConfig()
    mu, var_a, _, var_p, _ = (float(v) for v in mnar)
    levels = [float(v) for v in effects]

    def work(replicate: int, seed: int, inner: FitConfig) -> List[Record]:
        records = []

        for v in levels:
            params = make_benchmark_params(epsilon, (mu, var_a, v, var_p, v))
            sample = sample_lbm(params, size, size, seed)
            n1, n2 = sample.x_observed.shape
            fit_mar = _fit(sample, MissingnessKind.MAR, seed, inner)
            fit_mnar = _fit(sample, MissingnessKind.MNAR, seed, inner)
            icl_mar = icl(fit_mar, n1, n2)
            icl_mnar = icl(fit_mnar, n1, n2)
            records.append(
                {
                    "replicate": replicate,
                    "effect": v,
                    "size": size,
                    "epsilon": float(epsilon),
                    "missing_rate": sample.x_observed.missing_rate(),
                    "l_item_mar": _item_loss(sample, fit_mar)["l_item"],
                    "l_item_mnar": _item_loss(sample, fit_mnar)["l_item"],
                    "icl_mar": icl_mar,
                    "icl_mnar": icl_mnar,
                    "icl_difference": icl_mnar - icl_mar,
                }
            )

        logger.info(f"MNAR effect sweep: replicate {replicate} done")

        return records

    return _replicates(work, n_replicates, cfg)


def _recovery_record(
    sample: CompleteSample, truth: ModelParams, fit, replicate: int, n: int
) -> Record:
    truth_labels = assignment_from_sample(sample)
    pred = map_assignments(fit.varstate)
    row_perm, col_perm = align_labels(truth_labels, pred, fit.nq, fit.nl)
    mse = latent_mse(sample, fit.varstate)

    return {
        "replicate": replicate,
        "size": n,
        "kind": fit.kind.value,
        "pi_max_error": param_max_error(truth, fit.params, row_perm, col_perm),
        **{
            f"mse_{block}": (None if math.isnan(value) else value)
            for block, value in zip("abpq", mse)
        },
        **_item_loss(sample, fit),
    }


def recovery_sweep(
    sizes: Sequence[int],
    epsilon: float,
    n_replicates: int,
    cfg: Optional[FitConfig] = None,
    kind: MissingnessKind = MissingnessKind.MNAR,
    mnar=DEFAULT_MNAR,
) -> List[Record]:
    """Parameter and latent-effect recovery over matrix sizes.

    Matrices are simulated and fitted under `kind`; an MCAR study therefore simulates
    without latent effects. Each size gets its own matrices.

    :param sizes: Square matrix sizes
    :type sizes: Sequence[int]
    :param float epsilon: The difficulty parameter
    :param int n_replicates: Number of simulated matrices per size
    :param cfg: The engine configuration, defaults to :const:`None` (defaults)
    :type cfg: FitConfig, optional
    :param kind: The missingness kind, defaults to MNAR
    :type kind: MissingnessKind, optional
    :param mnar: Propensity parameters, defaults to :const:`DEFAULT_MNAR`
    :return: One record per replicate and size, with :math:`\\pi` max-error and the
      mean squared errors of the latent effects
    :rtype: list[dict[str, Any]]
    """
    cfg = cfg or FitConfig()
    kind = MissingnessKind.parse(kind)
    params = make_benchmark_params(epsilon, mnar, kind)
    sizes = sorted(int(n) for n in sizes)

    def work(replicate: int, seed: int, inner: FitConfig) -> List[Record]:
        records = []

        for n, size_seed in zip(sizes, spawn_seeds(seed, len(sizes))):
            sample = sample_lbm(params, n, n, size_seed)
            fit = _fit(sample, kind, size_seed, inner)
            records.append(_recovery_record(sample, params, fit, replicate, n))

        logger.info(f"Recovery sweep: replicate {replicate} done")

        return records

    return _replicates(work, n_replicates, cfg)


def class_count_selection(
    size: int,
    epsilon: float,
    n_replicates: int,
    nq_range,
    nl_range,
    cfg: Optional[FitConfig] = None,
    kinds=(MissingnessKind.MNAR,),
    mnar=DEFAULT_MNAR,
) -> List[Record]:
    """Class counts selected by ICL on benchmark matrices of three row and three
    column classes.

    :return: One record per replicate with the selected counts and kind
    :rtype: list[dict[str, Any]]
    """
    cfg = cfg or FitConfig()
    params = make_benchmark_params(epsilon, mnar)
    selection_config = SelectionConfig(
        nq_range=nq_range, nl_range=nl_range, kinds=kinds
    )

    def work(replicate: int, seed: int, inner: FitConfig) -> List[Record]:
        sample = sample_lbm(params, size, size, seed)
        best, table = select_model(
            sample.x_observed,
            selection_config.nq_range,
            selection_config.nl_range,
            selection_config.kinds,
            attr.evolve(inner, seed=seed),
            selection_config,
        )
        logger.info(
            f"Class count selection: replicate {replicate} chose {best.fit_ref}"
        )

        return [
            {
                "replicate": replicate,
                "size": size,
                "epsilon": float(epsilon),
                "nq": best.nq,
                "nl": best.nl,
                "kind": best.kind.value,
                "icl": best.icl,
                "correct": (best.nq, best.nl)
                == (BENCHMARK_CLASSES, BENCHMARK_CLASSES),
                "n_failed": len(table) - len(table.successful()),
            }
        ]

    return _replicates(work, n_replicates, cfg)
