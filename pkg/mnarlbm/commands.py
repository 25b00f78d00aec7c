"""The commands of the command-line interface.

Every command takes the merged configuration of :func:`mnarlbm.config.build_config`
and returns an exit status. Result files go through a single
:class:`mnarlbm.results.ResultWriter`; any failure is logged and recorded in
:file:`FAILED.json` in the output directory, and the command returns 1.
"""
import json
from collections.abc import Mapping
from typing import Any, Callable, Dict, List, Optional, Tuple

import attr
import numpy as np
from mnarlbm import experiments
from mnarlbm.config import ConfigError
from mnarlbm.inference import FitConfig, multi_start_fit
from mnarlbm.logging import logger
from mnarlbm.metrics import (
    LabelAssignment,
    align_labels,
    l_item,
    latent_mse,
    map_assignments,
    param_max_error,
)
from mnarlbm.model import MissingnessKind, ObservedMatrix
from mnarlbm.parsers import load_matrix
from mnarlbm.results import (
    GroundTruth,
    ResultWriter,
    RunManifest,
    file_digest,
    fit_from_dict,
    fit_to_dict,
    truth_from_dict,
    truth_to_dict,
)
from mnarlbm.results.serialization import record_columns, to_plain
from mnarlbm.schema import validate
from mnarlbm.selection import SelectionConfig, icl, select_model
from mnarlbm.selection.search import TABLE_COLUMNS, parse_counts, parse_kinds
from mnarlbm.simulation import (
    RiskConfig,
    calibrate_epsilon,
    estimate_risk,
    make_benchmark_params,
    sample_lbm,
)
from mnarlbm.simulation.risk import median_risk
from mnarlbm.simulation.sampler import MnarEffects

Config = Mapping
Body = Callable[[Config, ResultWriter, RunManifest], None]


def parse_floats(value) -> Tuple[float, ...]:
    """Parses a comma-separated string, a number or a sequence into floats.

    :raises ConfigError: A value is not a number
    """
    if isinstance(value, str):
        items = [v for v in value.split(",") if v.strip()]
    elif isinstance(value, (int, float)):
        items = [value]
    else:
        items = list(value)

    try:
        return tuple(float(v) for v in items)
    except (TypeError, ValueError):
        raise ConfigError(f"expecting comma-separated numbers, got '{value}'") from None


def parse_mnar(value) -> MnarEffects:
    effects = parse_floats(value)

    if len(effects) != 5:
        raise ConfigError(
            "expecting 'mu,var_a,var_b,var_p,var_q' propensity parameters, "
            f"got '{value}'"
        )

    return effects


def _require(config: Config, key: str) -> Any:
    value = config.get(key)

    if value is None:
        raise ConfigError(f"missing required option '{key}'")

    return value


def _fit_config(config: Config) -> FitConfig:
    return FitConfig.from_mapping(config)


def _load_input(config: Config, manifest: RunManifest) -> ObservedMatrix:
    path = _require(config, "input")
    manifest.input_digest = file_digest(path)

    with manifest.timed("load"):
        return load_matrix(path, config.get("format", "ternary-csv"))


def _read_document(path: str, schema: str) -> Dict[str, Any]:
    with open(path) as f:
        document = json.load(f)

    validate(document, schema)

    return document


def run_command(command: str, config: Config, body: Body) -> int:
    """Runs `body` at the command boundary.

    :param str command: The command name
    :param config: The merged configuration, holding ``output_dir``
    :param body: The command body, given the configuration, the writer and the
      manifest
    :return: 0 on success, 1 on failure
    :rtype: int
    """
    manifest = RunManifest(
        command,
        seed=config.get("seed", 0),
        deterministic=config.get("deterministic", False),
    )
    writer = None

    try:
        writer = ResultWriter(_require(config, "output_dir"), command)
        body(config, writer, manifest)
    except Exception as e:
        logger.error(f"Command '{command}' failed: {type(e).__name__}: {e}")

        if writer is not None:
            writer.write_failure(e, manifest)

        return 1

    logger.info(f"Command '{command}' wrote {', '.join(writer.written)}")

    return 0


# -- simulate --------------------------------------------------------------------------


def _benchmark_epsilon(config: Config, n_rows: int, n_cols: int, mnar) -> float:
    target = config.get("target_risk")

    if target is None:
        return float(_require(config, "epsilon"))

    return calibrate_epsilon(
        float(target),
        n_rows,
        n_cols,
        mnar,
        int(config.get("seed", 0)),
        config=RiskConfig.from_mapping(config),
    )


def _simulate(config: Config, writer: ResultWriter, manifest: RunManifest):
    n_rows, n_cols = int(_require(config, "rows")), int(_require(config, "cols"))
    mnar = parse_mnar(config.get("mnar", "1,1,1,1,1"))
    kind = MissingnessKind.parse(config.get("kind", "mnar"))

    with manifest.timed("calibrate"):
        epsilon = _benchmark_epsilon(config, n_rows, n_cols, mnar)

    manifest.config = {
        "rows": n_rows,
        "cols": n_cols,
        "epsilon": epsilon,
        "mnar": list(mnar),
        "kind": kind.value,
    }
    params = make_benchmark_params(epsilon, mnar, kind)

    with manifest.timed("simulate"):
        sample = sample_lbm(params, n_rows, n_cols, manifest.seed)

    x = sample.x_observed
    writer.write_matrix("matrix.csv", x)
    writer.write_matrix("complete.csv", ObservedMatrix(sample.x_complete))
    writer.write_matrix("mask.csv", ObservedMatrix(sample.mask))
    truth = GroundTruth.from_sample(sample, params, epsilon)
    writer.write_json(
        "truth.json", truth_to_dict(truth, manifest, x.missing_rate()), "truth"
    )


def cmd_simulate(config: Config) -> int:
    """Simulates a benchmark matrix.

    Writes :file:`matrix.csv` (the observed matrix), :file:`complete.csv`,
    :file:`mask.csv` and :file:`truth.json`. When ``target_risk`` is set, the
    difficulty is first calibrated to reach it.
    """
    return run_command("simulate", config, _simulate)


# -- fit -------------------------------------------------------------------------------


def _fit(config: Config, writer: ResultWriter, manifest: RunManifest):
    x = _load_input(config, manifest)
    cfg = _fit_config(config)
    manifest.config = cfg.to_dict()
    nq, nl = int(_require(config, "nq")), int(_require(config, "nl"))
    kind = MissingnessKind.parse(config.get("kind", "mnar"))

    with manifest.timed("fit"):
        result = multi_start_fit(x, nq, nl, kind, cfg)

    value = icl(result, x.n_rows, x.n_cols, bool(config.get("icl_uses_entropy", True)))
    writer.write_json("fit.json", fit_to_dict(result, manifest, value), "fit-result")


def cmd_fit(config: Config) -> int:
    """Fits one model to the input matrix and writes :file:`fit.json`."""
    return run_command("fit", config, _fit)


# -- select ----------------------------------------------------------------------------


def _select(config: Config, writer: ResultWriter, manifest: RunManifest):
    x = _load_input(config, manifest)
    cfg = _fit_config(config)
    selection_config = SelectionConfig.from_mapping(config)
    manifest.config = {
        **cfg.to_dict(),
        "nq_range": list(selection_config.nq_range),
        "nl_range": list(selection_config.nl_range),
        "kinds": [k.value for k in selection_config.kinds],
        "icl_uses_entropy": selection_config.icl_uses_entropy,
    }

    with manifest.timed("select"):
        best, table = select_model(
            x,
            selection_config.nq_range,
            selection_config.nl_range,
            selection_config.kinds,
            cfg,
            selection_config,
        )

    rows = table.to_rows()
    writer.write_records("selection.csv", rows, TABLE_COLUMNS)
    writer.write_json(
        "selection.json",
        {
            "manifest": manifest.to_dict(),
            "icl_uses_entropy": selection_config.icl_uses_entropy,
            "best": to_plain(best.to_row()),
            "table": to_plain(rows),
        },
        "selection",
    )
    writer.write_json(
        "best-fit.json", fit_to_dict(best.fit, manifest, best.icl), "fit-result"
    )


def cmd_select(config: Config) -> int:
    """Selects class counts and missingness kind by ICL.

    Writes :file:`selection.csv`, :file:`selection.json` and :file:`best-fit.json`.
    """
    return run_command("select", config, _select)


# -- risk ------------------------------------------------------------------------------


def _risk(config: Config, writer: ResultWriter, manifest: RunManifest):
    risk_config = RiskConfig.from_mapping(config)
    manifest.config = attr.asdict(risk_config)

    if config.get("target_risk") is not None:
        n_rows, n_cols = int(_require(config, "rows")), int(_require(config, "cols"))
        mnar = parse_mnar(config.get("mnar", "1,1,1,1,1"))
        target = float(config["target_risk"])

        with manifest.timed("calibrate"):
            epsilon = calibrate_epsilon(
                target, n_rows, n_cols, mnar, manifest.seed, config=risk_config
            )
            risk = median_risk(
                epsilon, n_rows, n_cols, mnar, manifest.seed, risk_config
            )

        document = {
            "mode": "calibrate",
            "risk": risk,
            "epsilon": epsilon,
            "target_risk": target,
            "n_rows": n_rows,
            "n_cols": n_cols,
            "mnar": list(mnar),
        }
    else:
        x = _load_input(config, manifest)
        truth = truth_from_dict(_read_document(_require(config, "truth"), "truth"))

        with manifest.timed("estimate"):
            estimate = estimate_risk(
                x,
                truth.params,
                risk_config,
                labels=(truth.row_labels, truth.col_labels),
                seed=manifest.seed,
            )

        document = {"mode": "estimate", **estimate.to_dict()}

    writer.write_json("risk.json", {"manifest": manifest.to_dict(), **document}, "risk")


def cmd_risk(config: Config) -> int:
    """Calibrates the benchmark difficulty or estimates a conditional Bayes risk.

    With ``target_risk`` set, the :math:`\\epsilon` reaching it on ``rows`` by ``cols``
    matrices is searched; otherwise the risk of the input matrix is estimated under the
    parameters of ``truth``. Writes :file:`risk.json`.
    """
    return run_command("risk", config, _risk)


# -- eval ------------------------------------------------------------------------------


def evaluate_fit(fit, truth: GroundTruth) -> Dict[str, Any]:
    """Classification and recovery errors of a fit against the ground truth.

    The maximal error on :math:`\pi` is :const:`None` when the class counts differ,
    and the latent errors are NaN for the blocks absent from the fit.

    :rtype: dict[str, Any]

    :raises ConfigError: The fit and the truth cover matrices of different sizes
    """
    fitted = (fit.varstate.n_rows, fit.varstate.n_cols)
    simulated = (truth.n_rows, truth.n_cols)

    if fitted != simulated:
        raise ConfigError(
            f"fit of a {fitted[0]}x{fitted[1]} matrix evaluated against the truth of "
            f"a {simulated[0]}x{simulated[1]} matrix"
        )

    truth_labels = LabelAssignment(truth.row_labels, truth.col_labels)
    pred = map_assignments(fit.varstate)
    nq, nl = max(fit.nq, truth.params.nq), max(fit.nl, truth.params.nl)
    row_perm, col_perm = align_labels(truth_labels, pred, nq, nl)
    loss = l_item(truth_labels, pred, nq, nl)
    same_classes = (fit.nq, fit.nl) == (truth.params.nq, truth.params.nl)
    mse = latent_mse(truth, fit.varstate)

    return {
        "metrics": {
            "l_item": loss.value,
            "row_error": loss.row,
            "col_error": loss.col,
            "pi_max_error": (
                param_max_error(truth.params, fit.params, row_perm, col_perm)
                if same_classes
                else None
            ),
            **{f"mse_{b}": v for b, v in zip("abpq", mse)},
        },
        "row_perm": row_perm,
        "col_perm": col_perm,
    }


def _eval(config: Config, writer: ResultWriter, manifest: RunManifest):
    fit = fit_from_dict(_read_document(_require(config, "fit"), "fit-result"))
    truth = truth_from_dict(_read_document(_require(config, "truth"), "truth"))

    with manifest.timed("eval"):
        evaluation = evaluate_fit(fit, truth)

    writer.write_json(
        "eval.json",
        to_plain(
            {"manifest": manifest.to_dict(), "fit_ref": fit.fit_ref, **evaluation}
        ),
        "eval",
    )


def cmd_eval(config: Config) -> int:
    """Evaluates a fit against the ground truth and writes :file:`eval.json`."""
    return run_command("eval", config, _eval)


# -- report ----------------------------------------------------------------------------


def _ordering(labels: np.ndarray, ids: Optional[Tuple[str, ...]]) -> List[List[Any]]:
    order = np.argsort(labels, kind="stable")

    return [
        [position, int(i), ids[i] if ids is not None else "", int(labels[i])]
        for position, i in enumerate(order)
    ]


def _propensities(gamma, labels, ids, blocks) -> List[Dict[str, Any]]:
    records = []

    for i, label in enumerate(labels):
        record = {
            "index": i,
            "id": ids[i] if ids is not None else "",
            "class": int(label),
        }

        for block in blocks:
            nu = gamma.mean(block)
            record[f"nu_{block}"] = None if nu is None else float(nu[i])

        records.append(record)

    return records


def _report(config: Config, writer: ResultWriter, manifest: RunManifest):
    fit = fit_from_dict(_read_document(_require(config, "fit"), "fit-result"))
    row_ids = col_ids = None

    if config.get("input"):
        x = _load_input(config, manifest)

        if x.shape != (fit.varstate.n_rows, fit.varstate.n_cols):
            raise ConfigError(
                f"input of shape {x.shape} not matching the fitted "
                f"{fit.varstate.n_rows}x{fit.varstate.n_cols} matrix"
            )

        row_ids, col_ids = x.row_ids, x.col_ids

    labels = map_assignments(fit.varstate)
    header = ["position", "index", "id", "class"]
    writer.write_csv("row-order.csv", header, _ordering(labels.row_labels, row_ids))
    writer.write_csv("col-order.csv", header, _ordering(labels.col_labels, col_ids))
    writer.write_records(
        "blocks.csv",
        [
            {
                "row_class": q,
                **{f"col_class_{k}": fit.params.pi[q, k] for k in range(fit.nl)},
            }
            for q in range(fit.nq)
        ],
        ["row_class"] + [f"col_class_{k}" for k in range(fit.nl)],
    )
    writer.write_records(
        "row-propensities.csv",
        _propensities(fit.varstate, labels.row_labels, row_ids, ("a", "b")),
        ["index", "id", "class", "nu_a", "nu_b"],
    )
    writer.write_records(
        "col-propensities.csv",
        _propensities(fit.varstate, labels.col_labels, col_ids, ("p", "q")),
        ["index", "id", "class", "nu_p", "nu_q"],
    )
    writer.write_json(
        "report.json",
        to_plain(
            {
                "manifest": manifest.to_dict(),
                "fit_ref": fit.fit_ref,
                "kind": fit.kind.value,
                "pi": fit.params.pi,
                "files": list(writer.written),
            }
        ),
        "report",
    )


def cmd_report(config: Config) -> int:
    """Writes plot-ready summaries of a fit.

    :file:`row-order.csv` and :file:`col-order.csv` list rows and columns grouped by
    their most probable class, :file:`blocks.csv` holds the grid of fitted block
    probabilities, and :file:`row-propensities.csv` and :file:`col-propensities.csv`
    hold the posterior means of the latent effects. :file:`report.json` records the
    manifest of the run next to the fit reference and the block probabilities.
    """
    return run_command("report", config, _report)


# -- experiment ------------------------------------------------------------------------


def _experiment_records(config: Config, cfg: FitConfig) -> List[Dict[str, Any]]:
    name = config.get("experiment", "size")
    replicates = int(_require(config, "replicates"))
    mnar = parse_mnar(config.get("mnar", "1,1,1,1,1"))
    sizes = parse_counts(config.get("sizes", "60,100,140"))
    size = int(config.get("rows") or max(sizes))
    scale = max(sizes) if name in ("size", "recovery") else size
    epsilon = _benchmark_epsilon(config, scale, scale, mnar)

    if name == "size":
        return experiments.size_sweep(
            sizes, epsilon, replicates, cfg, mnar, RiskConfig.from_mapping(config)
        )
    elif name == "nmar-effect":
        effects = parse_floats(_require(config, "effects"))
        return experiments.nmar_effect_sweep(
            effects, epsilon, size, replicates, cfg, mnar
        )
    elif name == "recovery":
        kind = MissingnessKind.parse(config.get("kind", "mnar"))
        return experiments.recovery_sweep(sizes, epsilon, replicates, cfg, kind, mnar)
    elif name == "class-count":
        return experiments.class_count_selection(
            size,
            epsilon,
            replicates,
            config.get("nq_range", "2-4"),
            config.get("nl_range", "2-4"),
            cfg,
            parse_kinds(config.get("kinds", "mnar")),
            mnar,
        )

    raise ConfigError(
        f"unknown experiment '{name}', expecting one of {list(experiments.EXPERIMENTS)}"
    )


def _experiment(config: Config, writer: ResultWriter, manifest: RunManifest):
    name = config.get("experiment", "size")
    cfg = _fit_config(config)
    manifest.config = cfg.to_dict()

    with manifest.timed(name):
        records = _experiment_records(config, cfg)

    writer.write_records(f"{name}.csv", records, record_columns(records))
    writer.write_json(
        f"{name}.json",
        {
            "manifest": manifest.to_dict(),
            "experiment": name,
            "records": to_plain(records),
        },
        "experiment",
    )


def cmd_experiment(config: Config) -> int:
    """Runs a desk-scale protocol of the simulated-data study.

    ``experiment`` is one of ``size``, ``nmar-effect``, ``recovery`` and
    ``class-count``. Writes :file:`<experiment>.csv` and :file:`<experiment>.json`.
    """
    return run_command("experiment", config, _experiment)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "select": cmd_select,
    "risk": cmd_risk,
    "eval": cmd_eval,
    "report": cmd_report,
    "experiment": cmd_experiment,
}
