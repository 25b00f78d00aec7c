"""Records of the variational EM engine: the mean-field posterior, the fitting
configuration and the fit result."""
import math
from collections.abc import Mapping
from typing import Any, Dict, Optional, Tuple

import attr
import numpy as np
from attr import attrib, attrs, validators
from mnarlbm.model import MissingnessKind, ModelParams
from mnarlbm.model.exceptions import ContractError, DimensionMismatchError

TAU_TOL = 1e-10

LATENT_BLOCKS = ("a", "b", "p", "q")


def _read_only(values) -> Optional[np.ndarray]:
    if values is None:
        return None

    array = np.array(values, dtype=float, copy=True)
    array.setflags(write=False)

    return array


def _check_tau(name: str, tau: np.ndarray) -> None:
    if tau.ndim != 2 or tau.shape[1] < 1:
        raise ContractError(f"{name} must be a two-dimensional grid, got {tau.shape}")

    if not np.all(np.isfinite(tau)) or np.any(tau < 0.0):
        raise ContractError(f"{name} must hold non-negative finite probabilities")

    worst = float(np.max(np.abs(tau.sum(axis=1) - 1.0))) if tau.size else 0.0

    if worst > TAU_TOL:
        raise ContractError(f"rows of {name} must sum to 1, off by {worst:.3g}")


@attrs(frozen=True, eq=False)
class VariationalState:
    """The mean-field posterior :math:`\\gamma`.

    Class memberships are the grids :attr:`tau_rows` and :attr:`tau_cols`. Every latent
    block ``a``, ``b`` (rows) and ``p``, ``q`` (columns) has a Gaussian posterior with
    means ``nu_*`` and variances ``rho_*``; a block absent from the model is stored as
    :const:`None`.

    :raises ContractError: A grid is not row-stochastic, a variance is not positive,
      or a block has only one of its mean and variance
    """

    tau_rows: np.ndarray = attrib(converter=_read_only)
    tau_cols: np.ndarray = attrib(converter=_read_only)
    nu_a: Optional[np.ndarray] = attrib(default=None, converter=_read_only)
    rho_a: Optional[np.ndarray] = attrib(default=None, converter=_read_only)
    nu_b: Optional[np.ndarray] = attrib(default=None, converter=_read_only)
    rho_b: Optional[np.ndarray] = attrib(default=None, converter=_read_only)
    nu_p: Optional[np.ndarray] = attrib(default=None, converter=_read_only)
    rho_p: Optional[np.ndarray] = attrib(default=None, converter=_read_only)
    nu_q: Optional[np.ndarray] = attrib(default=None, converter=_read_only)
    rho_q: Optional[np.ndarray] = attrib(default=None, converter=_read_only)

    def __attrs_post_init__(self):
        _check_tau("tau_rows", self.tau_rows)
        _check_tau("tau_cols", self.tau_cols)

        for block in LATENT_BLOCKS:
            nu, rho = self.mean(block), self.var(block)

            if (nu is None) != (rho is None):
                raise ContractError(f"block '{block}' needs both its mean and variance")

            if nu is None:
                continue

            size = self.n_rows if block in ("a", "b") else self.n_cols

            if nu.shape != (size,):
                raise DimensionMismatchError(f"nu_{block}", (size,), nu.shape)

            if rho.shape != (size,):
                raise DimensionMismatchError(f"rho_{block}", (size,), rho.shape)

            if not np.all(np.isfinite(nu)):
                raise ContractError(f"nu_{block} must be finite")

            if not np.all(np.isfinite(rho)) or np.any(rho <= 0.0):
                raise ContractError(f"rho_{block} must be positive")

    @property
    def n_rows(self) -> int:
        return int(self.tau_rows.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.tau_cols.shape[0])

    @property
    def nq(self) -> int:
        return int(self.tau_rows.shape[1])

    @property
    def nl(self) -> int:
        return int(self.tau_cols.shape[1])

    @property
    def blocks(self) -> Tuple[str, ...]:
        """The latent blocks present, in canonical order."""
        return tuple(b for b in LATENT_BLOCKS if self.mean(b) is not None)

    def mean(self, block: str) -> Optional[np.ndarray]:
        return getattr(self, f"nu_{block}")

    def var(self, block: str) -> Optional[np.ndarray]:
        return getattr(self, f"rho_{block}")

    def permuted(self, row_perm, col_perm) -> "VariationalState":
        """Relabels the classes as :meth:`ModelParams.permuted` does."""
        tau_rows = np.empty_like(self.tau_rows)
        tau_cols = np.empty_like(self.tau_cols)
        tau_rows[:, np.asarray(row_perm)] = self.tau_rows
        tau_cols[:, np.asarray(col_perm)] = self.tau_cols

        return attr.evolve(self, tau_rows=tau_rows, tau_cols=tau_cols)

    def restricted(self, kind: MissingnessKind) -> "VariationalState":
        """Drops the latent blocks absent under `kind`."""
        kept = MissingnessKind.parse(kind).latent_blocks
        changes = {}

        for block in LATENT_BLOCKS:
            if block not in kept:
                changes[f"nu_{block}"] = None
                changes[f"rho_{block}"] = None

        return attr.evolve(self, **changes)


def _positive(instance, attribute, value):
    if not value > 0:
        raise ValueError(f"'{attribute.name}' must be positive, got {value!r}")


def _from_mapping(cls, mapping: Mapping):
    names = {a.name for a in attr.fields(cls)}

    return cls(**{k: v for k, v in mapping.items() if k in names and v is not None})


@attrs(frozen=True)
class FitConfig:
    """Configuration of the variational EM engine.

    :param int max_vem_iters: Cap on the number of VEM iterations, defaults to 500
    :param float elbo_rel_tol: Relative change of the criterion under which the fit
      has converged, defaults to ``1e-6``
    :param int max_inner_iters: Cap on the quasi-Newton iterations of each half-step,
      defaults to 100
    :param float gradient_tol: Projected-gradient tolerance of the quasi-Newton
      solves, defaults to ``1e-5``
    :param int history_size: Number of corrections kept by L-BFGS, defaults to 10
    :param int n_inits: Number of multi-start candidates, defaults to 1
    :param int warmup_iters: VEM iterations run on every candidate, defaults to 15
    :param int seed: Seed of the initializations, defaults to 0
    :param bool deterministic: Whether result files must be byte-reproducible,
      defaults to :const:`False`
    :param int n_jobs: Number of parallel workers, defaults to 1
    :param int chunk_cells: Size, in cell-block products, of the chunks streamed
      through the criterion, defaults to ``2**21``
    """

    max_vem_iters: int = attrib(default=500, converter=int, validator=_positive)
    elbo_rel_tol: float = attrib(default=1e-6, converter=float, validator=_positive)
    max_inner_iters: int = attrib(default=100, converter=int, validator=_positive)
    gradient_tol: float = attrib(default=1e-5, converter=float, validator=_positive)
    history_size: int = attrib(default=10, converter=int, validator=_positive)
    n_inits: int = attrib(default=1, converter=int, validator=_positive)
    warmup_iters: int = attrib(default=15, converter=int, validator=_positive)
    seed: int = attrib(default=0, converter=int)
    deterministic: bool = attrib(default=False, converter=bool)
    n_jobs: int = attrib(
        default=1, converter=int, validator=validators.instance_of(int)
    )
    chunk_cells: int = attrib(default=2 ** 21, converter=int, validator=_positive)

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "FitConfig":
        """Builds a configuration from a mapping, ignoring unrelated keys."""
        return _from_mapping(cls, mapping)

    def to_dict(self) -> Dict[str, Any]:
        return attr.asdict(self)


@attrs(frozen=True, eq=False)
class FitResult:
    """Outcome of a variational EM fit.

    :ivar ModelParams params: The fitted parameters
    :ivar VariationalState varstate: The fitted posterior
    :ivar elbo_trace: Criterion value at start and after every half-step
    :vartype elbo_trace: tuple[float, ...]
    :ivar bool converged: Whether the relative change fell under the tolerance
    :ivar int n_iters: Number of VEM iterations run
    :ivar int seed: Seed of the initialization
    :ivar bool degenerate: Whether the matrix had no observed cell
    :ivar int n_clamped: Number of missing-cell guard activations at the final point
    :ivar float entropy: Entropy of the final posterior
    """

    params: ModelParams = attrib()
    varstate: VariationalState = attrib()
    elbo_trace: Tuple[float, ...] = attrib(
        converter=lambda t: tuple(float(v) for v in t)
    )
    converged: bool = attrib(converter=bool)
    n_iters: int = attrib(converter=int)
    seed: int = attrib(converter=int)
    degenerate: bool = attrib(default=False, converter=bool)
    n_clamped: int = attrib(default=0, converter=int)
    entropy: float = attrib(default=math.nan, converter=float)

    @property
    def kind(self) -> MissingnessKind:
        return self.params.kind

    @property
    def nq(self) -> int:
        return self.params.nq

    @property
    def nl(self) -> int:
        return self.params.nl

    @property
    def elbo(self) -> float:
        """The final value of the criterion :math:`J`."""
        return self.elbo_trace[-1]

    @property
    def fit_ref(self) -> str:
        """Identifier of the fit, such as ``mnar-3x3``."""
        return f"{self.kind.value}-{self.nq}x{self.nl}"
