"""Domain types of the Latent Block Model extended to missing data.

The types are immutable :mod:`attrs` records holding :mod:`numpy` arrays. Arrays are
copied and flagged read-only on construction, so the records can be shared freely
between concurrent fits.

.. note::
   The latent effects :math:`A, B, P, Q` are centered Gaussians whose *variances* are
   stored in :attr:`ModelParams.var_a`, ..., :attr:`ModelParams.var_q`. Some notations
   write :math:`\\mathcal{N}(0, \\sigma_A)`; :mod:`mnarlbm` reads the second argument
   as a variance throughout.
"""
import enum
from typing import Optional, Tuple

import attr
import numpy as np
from attr import attrib, attrs
from mnarlbm.model.exceptions import ContractError, DimensionMismatchError, DomainError

PI_FLOOR = 1e-6
"""Lower clamp of the block probabilities; the upper clamp is ``1 - PI_FLOOR``."""

SIMPLEX_TOL = 1e-8


class CellState(enum.IntEnum):
    """Integer codes of the cells of an :class:`ObservedMatrix`."""

    MISSING = -1
    ZERO = 0
    ONE = 1


class MissingnessKind(enum.Enum):
    """The missingness mechanisms handled by the model.

    MCAR drops every latent effect of the propensity, MAR keeps the row and column
    effects :math:`A` and :math:`P`, and MNAR adds the value-dependent effects
    :math:`B` and :math:`Q`.
    """

    MCAR = "mcar"
    MAR = "mar"
    MNAR = "mnar"

    @property
    def latent_blocks(self) -> Tuple[str, ...]:
        """The latent blocks present under this kind, in canonical order.

        :rtype: tuple[str, ...]
        """
        return {
            MissingnessKind.MCAR: (),
            MissingnessKind.MAR: ("a", "p"),
            MissingnessKind.MNAR: ("a", "b", "p", "q"),
        }[self]

    @property
    def complexity(self) -> int:
        """Rank used to prefer simpler mechanisms on ties."""
        return {
            MissingnessKind.MCAR: 0,
            MissingnessKind.MAR: 1,
            MissingnessKind.MNAR: 2,
        }[self]

    @classmethod
    def parse(cls, value) -> "MissingnessKind":
        """Parses a kind from its name, case-insensitively.

        ``nmar`` is accepted as an alias of ``mnar``.

        :param value: A kind name or a :class:`MissingnessKind`
        :return: The parsed kind
        :rtype: MissingnessKind

        :raises DomainError: The name is not a known missingness kind
        """
        if isinstance(value, cls):
            return value

        name = str(value).strip().lower()

        if name == "nmar":
            name = "mnar"

        try:
            return cls(name)
        except ValueError:
            raise DomainError("kind", value, "{mcar, mar, mnar}") from None


ROW_BLOCKS = ("a", "b")
COL_BLOCKS = ("p", "q")


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _as_cells(cells) -> np.ndarray:
    return _read_only(np.array(cells, dtype=np.int8, copy=True))


def _as_float_array(values) -> np.ndarray:
    return _read_only(np.array(values, dtype=float, copy=True))


def _as_label_array(values) -> np.ndarray:
    return _read_only(np.array(values, dtype=np.int64, copy=True))


def _optional_ids(ids) -> Optional[Tuple[str, ...]]:
    return None if ids is None else tuple(str(i) for i in ids)


@attrs(frozen=True, eq=False)
class ObservedMatrix:
    """A :math:`n_1 \\times n_2` matrix of ternary cells.

    :param cells: An integer array of :class:`CellState` codes
    :type cells: numpy.ndarray
    :param row_ids: Optional row identifiers, defaults to :const:`None`
    :type row_ids: tuple[str, ...], optional
    :param col_ids: Optional column identifiers, defaults to :const:`None`
    :type col_ids: tuple[str, ...], optional

    :raises DomainError: A cell holds a code outside :class:`CellState`
    :raises ContractError: The matrix is not two-dimensional or is empty
    """

    cells: np.ndarray = attrib(converter=_as_cells)
    row_ids: Optional[Tuple[str, ...]] = attrib(default=None, converter=_optional_ids)
    col_ids: Optional[Tuple[str, ...]] = attrib(default=None, converter=_optional_ids)

    def __attrs_post_init__(self):
        if self.cells.ndim != 2:
            raise ContractError(
                f"an observed matrix must be two-dimensional, got {self.cells.ndim} "
                "dimensions"
            )

        if self.cells.shape[0] < 1 or self.cells.shape[1] < 1:
            raise ContractError(
                f"an observed matrix needs at least one row and one column, got shape "
                f"{self.cells.shape}"
            )

        bad = ~np.isin(self.cells, [s.value for s in CellState])

        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise DomainError(f"cells[{i}, {j}]", int(self.cells[i, j]), "{-1, 0, 1}")

        if self.row_ids is not None and len(self.row_ids) != self.n_rows:
            raise DimensionMismatchError(
                "row_ids", (self.n_rows,), (len(self.row_ids),)
            )

        if self.col_ids is not None and len(self.col_ids) != self.n_cols:
            raise DimensionMismatchError(
                "col_ids", (self.n_cols,), (len(self.col_ids),)
            )

    @property
    def n_rows(self) -> int:
        return int(self.cells.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.cells.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_rows, self.n_cols

    def indicators(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns the float indicator matrices of ones, zeros and missing cells.

        :rtype: tuple[numpy.ndarray, numpy.ndarray, numpy.ndarray]
        """
        return (
            (self.cells == CellState.ONE).astype(float),
            (self.cells == CellState.ZERO).astype(float),
            (self.cells == CellState.MISSING).astype(float),
        )

    def missing_rate(self) -> float:
        """Returns the fraction of missing cells."""
        return float(np.mean(self.cells == CellState.MISSING))

    def is_all_missing(self) -> bool:
        return bool(np.all(self.cells == CellState.MISSING))

    def filled(self, fill_value: int = 0) -> np.ndarray:
        """Returns the cells as a float array with missing cells set to `fill_value`."""
        return np.where(
            self.cells == CellState.MISSING, fill_value, self.cells
        ).astype(float)

    def equals(self, other: "ObservedMatrix") -> bool:
        """Compares cells and identifiers with another matrix."""
        return (
            isinstance(other, ObservedMatrix)
            and self.shape == other.shape
            and bool(np.array_equal(self.cells, other.cells))
            and self.row_ids == other.row_ids
            and self.col_ids == other.col_ids
        )

    @classmethod
    def from_complete(
        cls, x_complete: np.ndarray, mask: np.ndarray
    ) -> "ObservedMatrix":
        """Builds the observed matrix revealing `x_complete` where `mask` is one.

        :param x_complete: A binary array
        :type x_complete: numpy.ndarray
        :param mask: A binary array of the same shape, one meaning observed
        :type mask: numpy.ndarray
        :rtype: ObservedMatrix
        """
        return cls(np.where(np.asarray(mask) == 1, x_complete, CellState.MISSING))


def _as_pi(values) -> np.ndarray:
    pi = np.array(values, dtype=float, copy=True)

    if pi.ndim != 2:
        raise ContractError(f"pi must be a two-dimensional grid, got shape {pi.shape}")

    if not np.all(np.isfinite(pi)) or np.any(pi < 0.0) or np.any(pi > 1.0):
        raise DomainError("pi", pi.tolist(), "[0, 1]")

    return _read_only(np.clip(pi, PI_FLOOR, 1.0 - PI_FLOOR))


def _check_simplex(name: str, alpha: np.ndarray) -> None:
    if alpha.ndim != 1 or alpha.size < 1:
        raise ContractError(
            f"{name} must be a non-empty vector, got shape {alpha.shape}"
        )

    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
        raise DomainError(name, alpha.tolist(), "the open simplex (all entries > 0)")

    if abs(alpha.sum() - 1.0) > SIMPLEX_TOL:
        raise DomainError(name, alpha.tolist(), "the simplex (entries summing to 1)")


@attrs(frozen=True, eq=False)
class ModelParams:
    """The model parameters :math:`\\theta` together with the missingness kind.

    :param MissingnessKind kind: The missingness mechanism
    :param alpha_rows: Row class proportions, length `nq`
    :type alpha_rows: numpy.ndarray
    :param alpha_cols: Column class proportions, length `nl`
    :type alpha_cols: numpy.ndarray
    :param pi: The `nq` x `nl` grid of block probabilities, clamped to
      ``[PI_FLOOR, 1 - PI_FLOOR]``
    :type pi: numpy.ndarray
    :param float mu: The global propensity, in log-odds units
    :param float var_a: Variance of the row effects :math:`A`
    :param float var_b: Variance of the row effects :math:`B`
    :param float var_p: Variance of the column effects :math:`P`
    :param float var_q: Variance of the column effects :math:`Q`

    :raises DomainError: A parameter is outside its domain
    :raises ContractError: The variances do not respect the kind constraints
    """

    kind: MissingnessKind = attrib(converter=MissingnessKind.parse)
    alpha_rows: np.ndarray = attrib(converter=_as_float_array)
    alpha_cols: np.ndarray = attrib(converter=_as_float_array)
    pi: np.ndarray = attrib(converter=_as_pi)
    mu: float = attrib(converter=float)
    var_a: float = attrib(default=0.0, converter=float)
    var_b: float = attrib(default=0.0, converter=float)
    var_p: float = attrib(default=0.0, converter=float)
    var_q: float = attrib(default=0.0, converter=float)

    def __attrs_post_init__(self):
        _check_simplex("alpha_rows", self.alpha_rows)
        _check_simplex("alpha_cols", self.alpha_cols)

        if self.pi.shape != (self.nq, self.nl):
            raise DimensionMismatchError("pi", (self.nq, self.nl), self.pi.shape)

        if not np.isfinite(self.mu):
            raise DomainError("mu", self.mu, "the finite reals")

        for block in ("a", "b", "p", "q"):
            v = self.variance(block)

            if not np.isfinite(v) or v < 0.0:
                raise DomainError(f"var_{block}", v, "[0, +inf)")

            if block not in self.kind.latent_blocks and v != 0.0:
                raise ContractError(
                    f"kind {self.kind.name} forces var_{block} = 0, got {v!r}"
                )

    @property
    def nq(self) -> int:
        return int(self.alpha_rows.size)

    @property
    def nl(self) -> int:
        return int(self.alpha_cols.size)

    def variance(self, block: str) -> float:
        """Returns the variance of latent block ``a``, ``b``, ``p`` or ``q``."""
        return getattr(self, f"var_{block}")

    def permuted(self, row_perm, col_perm) -> "ModelParams":
        """Relabels the classes.

        Class ``q`` becomes class ``row_perm[q]`` and class ``l`` becomes class
        ``col_perm[l]``; proportions and block probabilities move with their classes.

        :param row_perm: A permutation of ``range(nq)``
        :param col_perm: A permutation of ``range(nl)``
        :rtype: ModelParams
        """
        row_perm = np.asarray(row_perm)
        col_perm = np.asarray(col_perm)
        alpha_rows = np.empty_like(self.alpha_rows)
        alpha_cols = np.empty_like(self.alpha_cols)
        pi = np.empty_like(self.pi)
        alpha_rows[row_perm] = self.alpha_rows
        alpha_cols[col_perm] = self.alpha_cols
        pi[np.ix_(row_perm, col_perm)] = self.pi

        return attr.evolve(self, alpha_rows=alpha_rows, alpha_cols=alpha_cols, pi=pi)

    def with_kind(self, kind) -> "ModelParams":
        """Returns a copy under `kind`, zeroing the variances of dropped blocks."""
        kind = MissingnessKind.parse(kind)
        variances = {
            f"var_{b}": (self.variance(b) if b in kind.latent_blocks else 0.0)
            for b in ("a", "b", "p", "q")
        }

        return attr.evolve(self, kind=kind, **variances)


@attrs(frozen=True, eq=False)
class CompleteSample:
    """Ground truth produced by simulating the generative model.

    :param row_labels: Row classes, length `n1`
    :param col_labels: Column classes, length `n2`
    :param a: Row effects :math:`A` (zeros when the block is absent)
    :param b: Row effects :math:`B`
    :param p: Column effects :math:`P`
    :param q: Column effects :math:`Q`
    :param x_complete: The complete binary matrix :math:`X^c`
    :param mask: The binary mask :math:`M`, one meaning observed
    :param ObservedMatrix x_observed: The observed matrix :math:`X^o`

    :raises ContractError: The pieces are inconsistent
    """

    row_labels: np.ndarray = attrib(converter=_as_label_array)
    col_labels: np.ndarray = attrib(converter=_as_label_array)
    a: np.ndarray = attrib(converter=_as_float_array)
    b: np.ndarray = attrib(converter=_as_float_array)
    p: np.ndarray = attrib(converter=_as_float_array)
    q: np.ndarray = attrib(converter=_as_float_array)
    x_complete: np.ndarray = attrib(converter=_as_cells)
    mask: np.ndarray = attrib(converter=_as_cells)
    x_observed: ObservedMatrix = attrib()

    def __attrs_post_init__(self):
        n1, n2 = self.x_complete.shape

        for name in ("row_labels", "a", "b"):
            if getattr(self, name).shape != (n1,):
                raise DimensionMismatchError(name, (n1,), getattr(self, name).shape)

        for name in ("col_labels", "p", "q"):
            if getattr(self, name).shape != (n2,):
                raise DimensionMismatchError(name, (n2,), getattr(self, name).shape)

        if self.mask.shape != (n1, n2):
            raise DimensionMismatchError("mask", (n1, n2), self.mask.shape)

        expected = ObservedMatrix.from_complete(self.x_complete, self.mask)

        if not np.array_equal(expected.cells, self.x_observed.cells):
            raise ContractError(
                "x_observed must reveal x_complete exactly where mask is one"
            )

    @property
    def n_rows(self) -> int:
        return int(self.x_complete.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.x_complete.shape[1])

    def latent(self, block: str) -> np.ndarray:
        """Returns the latent vector of block ``a``, ``b``, ``p`` or ``q``."""
        return getattr(self, block)
