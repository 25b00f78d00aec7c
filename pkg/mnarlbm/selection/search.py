"""Grid search over class counts and missingness kinds."""
from collections.abc import Mapping
from typing import Iterator, List, Optional, Sequence, Tuple

import attr
import numpy as np
from attr import attrib, attrs
from joblib import Parallel, delayed
from mnarlbm.inference.state import FitConfig, FitResult
from mnarlbm.inference.vem import multi_start_fit
from mnarlbm.logging import logger
from mnarlbm.model import MissingnessKind, ObservedMatrix
from mnarlbm.model.exceptions import DomainError
from mnarlbm.selection.exceptions import AllFitsFailedError
from mnarlbm.selection.icl import icl
from mnarlbm.utils import resolve_n_jobs

TABLE_COLUMNS = ("nq", "nl", "kind", "icl", "elbo", "fit_ref", "status")


def parse_counts(value) -> Tuple[int, ...]:
    """Parses a range of class counts.

    Accepts an integer, a sequence of integers, ``"2-5"`` or ``"2,3,4"``.

    :rtype: tuple[int, ...]

    :raises DomainError: The range is empty or holds a count lower than one
    """
    if isinstance(value, str):
        text = value.strip()

        try:
            if "-" in text:
                low, high = (int(v) for v in text.split("-", 1))
                counts = tuple(range(low, high + 1))
            else:
                counts = tuple(int(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise DomainError(
                "range", value, "'low-high' or comma-separated counts"
            ) from None
    elif isinstance(value, (int, np.integer)):
        counts = (int(value),)
    else:
        counts = tuple(int(v) for v in value)

    if not counts or min(counts) < 1:
        raise DomainError("range", value, "non-empty ranges of counts >= 1")

    return counts


def parse_kinds(value) -> Tuple[MissingnessKind, ...]:
    """Parses missingness kinds from a comma-separated string or a sequence."""
    items = value.split(",") if isinstance(value, str) else value
    kinds = tuple(MissingnessKind.parse(v) for v in items if str(v).strip())

    if not kinds:
        raise DomainError("kinds", value, "non-empty sets of {mcar, mar, mnar}")

    return kinds


@attrs(frozen=True)
class SelectionConfig:
    """Configuration of the grid search.

    :param nq_range: Row class counts, defaults to ``(2, 3, 4)``
    :param nl_range: Column class counts, defaults to ``(2, 3, 4)``
    :param kinds: Missingness kinds, defaults to MAR and MNAR
    :param bool icl_uses_entropy: Whether the ICL bound keeps the posterior entropy,
      defaults to :const:`True`
    :param int n_jobs: Number of grid cells fitted in parallel, defaults to 1
    """

    nq_range: Tuple[int, ...] = attrib(default=(2, 3, 4), converter=parse_counts)
    nl_range: Tuple[int, ...] = attrib(default=(2, 3, 4), converter=parse_counts)
    kinds: Tuple[MissingnessKind, ...] = attrib(
        default=(MissingnessKind.MAR, MissingnessKind.MNAR), converter=parse_kinds
    )
    icl_uses_entropy: bool = attrib(default=True, converter=bool)
    n_jobs: int = attrib(default=1, converter=int)

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "SelectionConfig":
        """Builds a configuration from a mapping, ignoring unrelated keys."""
        names = {a.name for a in attr.fields(cls)}

        return cls(**{k: v for k, v in mapping.items() if k in names and v is not None})


@attrs(frozen=True, eq=False)
class SelectionEntry:
    """One cell of the selection grid.

    :ivar int nq: Number of row classes
    :ivar int nl: Number of column classes
    :ivar MissingnessKind kind: The missingness kind
    :ivar icl: ICL of the fit, :const:`None` if the fit failed
    :vartype icl: float or None
    :ivar elbo: Final criterion of the fit, :const:`None` if the fit failed
    :vartype elbo: float or None
    :ivar str fit_ref: Identifier of the fit, such as ``mnar-3x3``
    :ivar str status: ``ok`` or the error message of the failed fit
    :ivar fit: The fit itself, :const:`None` if it failed
    :vartype fit: FitResult or None
    """

    nq: int = attrib()
    nl: int = attrib()
    kind: MissingnessKind = attrib()
    icl: Optional[float] = attrib()
    elbo: Optional[float] = attrib()
    fit_ref: str = attrib()
    status: str = attrib(default="ok")
    fit: Optional[FitResult] = attrib(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def sort_key(self) -> Tuple[float, int, int]:
        """Key maximized by the best entry: ICL, then fewer classes, then the simpler
        kind."""
        return (self.icl, -(self.nq + self.nl), -self.kind.complexity)

    def to_row(self) -> dict:
        return {
            "nq": self.nq,
            "nl": self.nl,
            "kind": self.kind.value,
            "icl": self.icl,
            "elbo": self.elbo,
            "fit_ref": self.fit_ref,
            "status": self.status,
        }


@attrs(frozen=True, eq=False)
class SelectionTable(Sequence):
    """The entries of a grid search, in grid order."""

    entries: Tuple[SelectionEntry, ...] = attrib(converter=tuple)

    def __getitem__(self, index):
        return self.entries[index]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[SelectionEntry]:
        return iter(self.entries)

    def successful(self) -> List[SelectionEntry]:
        return [e for e in self.entries if e.ok]

    def best(self) -> SelectionEntry:
        """The successful entry of highest ICL, ties going to parsimony.

        :raises AllFitsFailedError: No entry succeeded
        """
        successful = self.successful()

        if not successful:
            raise AllFitsFailedError(
                len(self.entries),
                self.entries[0].status if self.entries else "empty grid",
            )

        return max(successful, key=SelectionEntry.sort_key)

    def to_rows(self) -> List[dict]:
        """Flat records with the keys of :const:`TABLE_COLUMNS`."""
        return [e.to_row() for e in self.entries]


def _fit_cell(
    x: ObservedMatrix,
    nq: int,
    nl: int,
    kind: MissingnessKind,
    cfg: FitConfig,
    use_entropy: bool,
) -> SelectionEntry:
    fit_ref = f"{kind.value}-{nq}x{nl}"

    try:
        result = multi_start_fit(x, nq, nl, kind, cfg)
        value = icl(result, x.n_rows, x.n_cols, use_entropy)
    except Exception as e:
        logger.warning(f"Fit {fit_ref} failed: {e}")
        return SelectionEntry(
            nq, nl, kind, None, None, fit_ref, status=str(e) or repr(e)
        )

    if not np.isfinite(value):
        return SelectionEntry(
            nq, nl, kind, None, result.elbo, fit_ref, status="non-finite ICL"
        )

    logger.info(f"Fit {fit_ref}: ICL = {value!r}")

    return SelectionEntry(nq, nl, kind, value, result.elbo, fit_ref, fit=result)


def select_model(
    x: ObservedMatrix,
    nq_range,
    nl_range,
    kinds,
    cfg: Optional[FitConfig] = None,
    selection_config: Optional[SelectionConfig] = None,
) -> Tuple[SelectionEntry, SelectionTable]:
    """Fits every grid cell and selects the model of highest ICL.

    The grid is ordered by row classes, then column classes, then kind. A failed fit
    is recorded in its entry and left out of the selection.

    :param ObservedMatrix x: The observed matrix
    :param nq_range: Row class counts
    :param nl_range: Column class counts
    :param kinds: Missingness kinds
    :param cfg: The engine configuration, defaults to :const:`None` (defaults)
    :type cfg: FitConfig, optional
    :param selection_config: Entropy switch and parallelism, defaults to :const:`None`
    :type selection_config: SelectionConfig, optional
    :return: The best entry and the whole table
    :rtype: tuple[SelectionEntry, SelectionTable]

    :raises AllFitsFailedError: No cell could be fitted
    """
    cfg = cfg or FitConfig()
    selection_config = attr.evolve(
        selection_config or SelectionConfig(),
        nq_range=nq_range,
        nl_range=nl_range,
        kinds=kinds,
    )
    cells = [
        (nq, nl, kind)
        for nq in selection_config.nq_range
        for nl in selection_config.nl_range
        for kind in selection_config.kinds
    ]
    n_jobs = resolve_n_jobs(selection_config.n_jobs)

    if n_jobs > 1:
        cfg = attr.evolve(cfg, n_jobs=1)

    entries = Parallel(n_jobs=n_jobs)(
        delayed(_fit_cell)(x, nq, nl, kind, cfg, selection_config.icl_uses_entropy)
        for nq, nl, kind in cells
    )
    table = SelectionTable(entries)
    best = table.best()
    logger.info(
        f"Selected {best.fit_ref} among {len(cells)} grid cells: ICL = {best.icl!r}"
    )

    return best, table
