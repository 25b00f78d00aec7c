"""Conversion of the domain records to and from plain documents.

Documents only hold JSON types: arrays become row-major nested lists, floats stay
Python floats (serialized with their shortest round-trip representation) and NaN
becomes :const:`None`.
"""
import contextlib
import hashlib
import math
import time
from collections.abc import Mapping
from typing import Any, Dict, List, Optional

import numpy as np
from attr import attrib, attrs
from mnarlbm import __version__
from mnarlbm.inference.state import LATENT_BLOCKS, FitResult, VariationalState
from mnarlbm.logging import logger
from mnarlbm.model import CompleteSample, ModelParams
from mnarlbm.model.types import COL_BLOCKS
from mnarlbm.results.exceptions import ResultFormatError

CSV_FLOAT_FORMAT = "%.17g"

_PARAM_FIELDS = ("var_a", "var_b", "var_p", "var_q")


def to_plain(value):
    """Recursively converts numpy values to JSON types, NaN and infinities to
    :const:`None`."""
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())

    if isinstance(value, Mapping):
        return {str(k): to_plain(v) for k, v in value.items()}

    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]

    if isinstance(value, (bool, np.bool_)):
        return bool(value)

    if isinstance(value, (int, np.integer)):
        return int(value)

    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None

    return value


def format_float(value: Optional[float]) -> str:
    """A CSV cell with 17 significant digits; empty for a missing value."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""

    return CSV_FLOAT_FORMAT % value


def file_digest(path: str) -> str:
    """The ``sha256:<hex>`` digest of a file."""
    sha = hashlib.sha256()

    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            sha.update(chunk)

    return f"sha256:{sha.hexdigest()}"


@attrs
class RunManifest:
    """Provenance embedded in every result document.

    :ivar str command: The command that produced the document
    :ivar config: Echo of the configuration of the run, without file-system paths
    :vartype config: dict[str, Any]
    :ivar input_digest: Digest of the input matrix, :const:`None` if there is none
    :vartype input_digest: str or None
    :ivar int seed: The seed of the run
    :ivar bool deterministic: Whether timings are left out of the documents
    :ivar str version: The package version
    :ivar timings: Duration in seconds of every timed phase
    :vartype timings: dict[str, float]
    """

    command: str = attrib()
    config: Dict[str, Any] = attrib(factory=dict)
    input_digest: Optional[str] = attrib(default=None)
    seed: int = attrib(default=0, converter=int)
    deterministic: bool = attrib(default=False, converter=bool)
    version: str = attrib(default=__version__)
    timings: Dict[str, float] = attrib(factory=dict)

    @contextlib.contextmanager
    def timed(self, phase: str):
        """Context manager recording the duration of `phase`."""
        start = time.perf_counter()

        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.timings[phase] = self.timings.get(phase, 0.0) + elapsed
            logger.info(f"{self.command}: phase '{phase}' took {elapsed:.3f} s")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": to_plain(self.config),
            "input_digest": self.input_digest,
            "seed": self.seed,
            "version": self.version,
            "timings": {} if self.deterministic else to_plain(self.timings),
        }


def params_to_dict(params: ModelParams) -> Dict[str, Any]:
    document = {
        "kind": params.kind.value,
        "alpha_rows": to_plain(params.alpha_rows),
        "alpha_cols": to_plain(params.alpha_cols),
        "pi": to_plain(params.pi),
        "mu": to_plain(params.mu),
    }
    document.update({name: to_plain(getattr(params, name)) for name in _PARAM_FIELDS})

    return document


def params_from_dict(document: Mapping) -> ModelParams:
    """Rebuilds parameters from :func:`params_to_dict` output.

    :raises ResultFormatError: A field is missing
    """
    try:
        return ModelParams(
            kind=document["kind"],
            alpha_rows=document["alpha_rows"],
            alpha_cols=document["alpha_cols"],
            pi=document["pi"],
            mu=document["mu"],
            **{name: document.get(name, 0.0) for name in _PARAM_FIELDS},
        )
    except KeyError as e:
        raise ResultFormatError("params", f"missing field {e}") from None


def varstate_to_dict(gamma: VariationalState) -> Dict[str, Any]:
    document = {
        "tau_rows": to_plain(gamma.tau_rows),
        "tau_cols": to_plain(gamma.tau_cols),
    }

    for block in LATENT_BLOCKS:
        document[f"nu_{block}"] = to_plain(gamma.mean(block))
        document[f"rho_{block}"] = to_plain(gamma.var(block))

    return document


def varstate_from_dict(document: Mapping) -> VariationalState:
    try:
        tau_rows = np.asarray(document["tau_rows"], dtype=float)
        tau_cols = np.asarray(document["tau_cols"], dtype=float)
    except KeyError as e:
        raise ResultFormatError("varstate", f"missing field {e}") from None

    latents = {}

    for block in LATENT_BLOCKS:
        for prefix in ("nu", "rho"):
            latents[f"{prefix}_{block}"] = document.get(f"{prefix}_{block}")

    # Rounded grids are renormalized onto the simplex.
    return VariationalState(
        tau_rows=tau_rows / tau_rows.sum(axis=1, keepdims=True),
        tau_cols=tau_cols / tau_cols.sum(axis=1, keepdims=True),
        **latents,
    )


def fit_to_dict(
    fit: FitResult, manifest: RunManifest, icl: Optional[float] = None
) -> Dict[str, Any]:
    """The ``fit-result`` document of a fit.

    :param FitResult fit: The fit
    :param RunManifest manifest: Provenance of the run
    :param icl: The ICL of the fit, defaults to :const:`None`
    :type icl: float, optional
    :rtype: dict[str, Any]
    """
    return {
        "manifest": manifest.to_dict(),
        "kind": fit.kind.value,
        "nq": fit.nq,
        "nl": fit.nl,
        "params": params_to_dict(fit.params),
        "varstate": varstate_to_dict(fit.varstate),
        "elbo": to_plain(fit.elbo),
        "elbo_trace": to_plain(fit.elbo_trace),
        "icl": to_plain(icl),
        "converged": fit.converged,
        "n_iters": fit.n_iters,
        "seed": fit.seed,
        "degenerate": fit.degenerate,
        "n_clamped": fit.n_clamped,
        "entropy": to_plain(fit.entropy),
    }


def fit_from_dict(document: Mapping) -> FitResult:
    """Rebuilds a fit from a ``fit-result`` document.

    :raises ResultFormatError: A field is missing
    """
    try:
        return FitResult(
            params=params_from_dict(document["params"]),
            varstate=varstate_from_dict(document["varstate"]),
            elbo_trace=document["elbo_trace"],
            converged=document["converged"],
            n_iters=document["n_iters"],
            seed=document["seed"],
            degenerate=document.get("degenerate", False),
            n_clamped=document.get("n_clamped", 0),
            entropy=(
                math.nan if document.get("entropy") is None else document["entropy"]
            ),
        )
    except KeyError as e:
        raise ResultFormatError("fit-result", f"missing field {e}") from None


@attrs(frozen=True, eq=False)
class GroundTruth:
    """The part of a simulated sample needed to evaluate a fit.

    It exposes the attributes of :class:`mnarlbm.model.CompleteSample` read by the
    metrics.
    """

    params: ModelParams = attrib()
    row_labels: np.ndarray = attrib(converter=lambda v: np.asarray(v, dtype=np.int64))
    col_labels: np.ndarray = attrib(converter=lambda v: np.asarray(v, dtype=np.int64))
    a: np.ndarray = attrib(converter=lambda v: np.asarray(v, dtype=float))
    b: np.ndarray = attrib(converter=lambda v: np.asarray(v, dtype=float))
    p: np.ndarray = attrib(converter=lambda v: np.asarray(v, dtype=float))
    q: np.ndarray = attrib(converter=lambda v: np.asarray(v, dtype=float))
    epsilon: Optional[float] = attrib(default=None)

    @property
    def n_rows(self) -> int:
        return int(self.row_labels.size)

    @property
    def n_cols(self) -> int:
        return int(self.col_labels.size)

    def latent(self, block: str) -> np.ndarray:
        return getattr(self, block)

    @classmethod
    def from_sample(
        cls,
        sample: CompleteSample,
        params: ModelParams,
        epsilon: Optional[float] = None,
    ) -> "GroundTruth":
        return cls(
            params,
            sample.row_labels,
            sample.col_labels,
            *(sample.latent(block) for block in LATENT_BLOCKS),
            epsilon=epsilon,
        )


def truth_to_dict(
    truth: GroundTruth, manifest: RunManifest, missing_rate: float
) -> Dict[str, Any]:
    document = {
        "manifest": manifest.to_dict(),
        "n_rows": truth.n_rows,
        "n_cols": truth.n_cols,
        "params": params_to_dict(truth.params),
        "row_labels": to_plain(truth.row_labels),
        "col_labels": to_plain(truth.col_labels),
        "latents": {block: to_plain(truth.latent(block)) for block in LATENT_BLOCKS},
        "missing_rate": to_plain(missing_rate),
    }

    if truth.epsilon is not None:
        document["epsilon"] = truth.epsilon

    return document


def truth_from_dict(document: Mapping) -> GroundTruth:
    """Rebuilds the ground truth of a ``truth`` document.

    :raises ResultFormatError: A field is missing or sized inconsistently
    """
    try:
        latents = document["latents"]
        truth = GroundTruth(
            params_from_dict(document["params"]),
            document["row_labels"],
            document["col_labels"],
            *(latents[block] for block in LATENT_BLOCKS),
            epsilon=document.get("epsilon"),
        )
    except KeyError as e:
        raise ResultFormatError("truth", f"missing field {e}") from None

    for block in LATENT_BLOCKS:
        size = truth.n_cols if block in COL_BLOCKS else truth.n_rows

        if truth.latent(block).shape != (size,):
            raise ResultFormatError(
                "truth", f"latent '{block}' has {truth.latent(block).size} values"
            )

    return truth


def records_to_rows(records: List[Mapping], columns: List[str]) -> List[List[str]]:
    """CSV rows of flat records, floats formatted with :const:`CSV_FLOAT_FORMAT`."""
    rows = []

    for record in records:
        row = []

        for column in columns:
            value = record.get(column)

            if isinstance(value, (bool, np.bool_)):
                row.append(str(bool(value)).lower())
            elif isinstance(value, (float, np.floating)):
                row.append(format_float(float(value)))
            elif value is None:
                row.append("")
            else:
                row.append(str(value))

        rows.append(row)

    return rows


def record_columns(records: List[Mapping]) -> List[str]:
    """The union of the keys of `records`, in order of first appearance."""
    columns = {}

    for record in records:
        columns.update(dict.fromkeys(record))

    return list(columns)

