"""Co-clustering losses and label alignment.

The item loss is the fraction of matrix cells whose row or column is misclassified:
:math:`l = l_r + l_c - l_r l_c`, with :math:`l_r` and :math:`l_c` the row and column
misclassification rates.
"""
from typing import Tuple

import numpy as np
from attr import attrib, attrs
from mnarlbm.inference.state import VariationalState
from mnarlbm.model.exceptions import ContractError, DimensionMismatchError
from mnarlbm.utils import SeedLike
from scipy.optimize import linear_sum_assignment


def _labels(values) -> np.ndarray:
    labels = np.array(values, dtype=np.int64, copy=True)
    labels.setflags(write=False)

    return labels


@attrs(frozen=True, eq=False)
class LabelAssignment:
    """Row and column class labels.

    :param row_labels: One class index per row
    :param col_labels: One class index per column

    :raises ContractError: A label is negative
    """

    row_labels: np.ndarray = attrib(converter=_labels)
    col_labels: np.ndarray = attrib(converter=_labels)

    def __attrs_post_init__(self):
        for name in ("row_labels", "col_labels"):
            labels = getattr(self, name)

            if labels.ndim != 1:
                raise ContractError(f"{name} must be a vector")

            if labels.size and labels.min() < 0:
                raise ContractError(f"{name} must hold non-negative class indices")

    @property
    def n_rows(self) -> int:
        return int(self.row_labels.size)

    @property
    def n_cols(self) -> int:
        return int(self.col_labels.size)


@attrs(frozen=True)
class ItemLoss:
    """An item loss with its components; ``float(loss)`` is :attr:`value`."""

    row: float = attrib(converter=float)
    col: float = attrib(converter=float)
    value: float = attrib(converter=float)

    def __float__(self) -> float:
        return self.value


def map_assignments(gamma: VariationalState) -> LabelAssignment:
    """Maximum a posteriori labels of a posterior, ties going to the lowest index.

    :rtype: LabelAssignment
    """
    return LabelAssignment(
        np.argmax(gamma.tau_rows, axis=1), np.argmax(gamma.tau_cols, axis=1)
    )


def _check_same_shape(truth: LabelAssignment, pred: LabelAssignment) -> None:
    if (truth.n_rows, truth.n_cols) != (pred.n_rows, pred.n_cols):
        raise DimensionMismatchError(
            "labels", (truth.n_rows, truth.n_cols), (pred.n_rows, pred.n_cols)
        )


def _best_permutation(
    truth: np.ndarray, pred: np.ndarray, n_classes: int
) -> np.ndarray:
    size = max(n_classes, int(truth.max(initial=-1)) + 1, int(pred.max(initial=-1)) + 1)
    confusion = np.zeros((size, size), dtype=np.int64)
    np.add.at(confusion, (pred, truth), 1)
    pred_classes, truth_classes = linear_sum_assignment(confusion, maximize=True)
    perm = np.empty(size, dtype=np.int64)
    perm[pred_classes] = truth_classes

    return perm


def align_labels(
    truth: LabelAssignment, pred: LabelAssignment, nq: int, nl: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Permutations mapping predicted classes onto true classes.

    Rows and columns are aligned independently by an optimal assignment maximizing the
    agreement counts of the confusion matrices.

    :param LabelAssignment truth: The true labels
    :param LabelAssignment pred: The predicted labels
    :param int nq: Number of row classes
    :param int nl: Number of column classes
    :return: ``(row_perm, col_perm)`` such that ``row_perm[pred]`` is the aligned label
    :rtype: tuple[numpy.ndarray, numpy.ndarray]

    :raises DimensionMismatchError: The assignments have different sizes
    """
    _check_same_shape(truth, pred)

    return (
        _best_permutation(truth.row_labels, pred.row_labels, nq),
        _best_permutation(truth.col_labels, pred.col_labels, nl),
    )


def relabel(assignment: LabelAssignment, row_perm, col_perm) -> LabelAssignment:
    """Applies class permutations to an assignment."""
    return LabelAssignment(
        np.asarray(row_perm)[assignment.row_labels],
        np.asarray(col_perm)[assignment.col_labels],
    )


def l_item(
    truth: LabelAssignment,
    pred: LabelAssignment,
    nq: int,
    nl: int,
    align: bool = True,
) -> ItemLoss:
    """The item loss of a co-clustering.

    :param LabelAssignment truth: The true labels
    :param LabelAssignment pred: The predicted labels
    :param int nq: Number of row classes
    :param int nl: Number of column classes
    :param align: Whether to align `pred` on `truth` first, defaults to :const:`True`
    :type align: bool, optional
    :return: The loss, in [0, 1], with its row and column components
    :rtype: ItemLoss

    :raises DimensionMismatchError: The assignments have different sizes
    """
    _check_same_shape(truth, pred)

    if align:
        pred = relabel(pred, *align_labels(truth, pred, nq, nl))

    row = float(np.mean(truth.row_labels != pred.row_labels))
    col = float(np.mean(truth.col_labels != pred.col_labels))

    return ItemLoss(row, col, row + col - row * col)


def expected_random_loss(nq: int, nl: int) -> float:
    """Item loss of uniformly random labels against balanced classes, such as
    :math:`8/9` for three row and three column classes."""
    row = (nq - 1) / nq
    col = (nl - 1) / nl

    return row + col - row * col


def random_allocation_loss(
    n1: int, n2: int, nq: int, nl: int, n_draws: int, seed: SeedLike
) -> float:
    """Mean unaligned item loss of uniformly random labels against uniformly random
    truths.

    :rtype: float
    """
    rng = np.random.default_rng(seed)
    losses = np.empty(n_draws)

    for k in range(n_draws):
        truth = LabelAssignment(rng.integers(nq, size=n1), rng.integers(nl, size=n2))
        pred = LabelAssignment(rng.integers(nq, size=n1), rng.integers(nl, size=n2))
        losses[k] = l_item(truth, pred, nq, nl, align=False).value

    return float(losses.mean())


def assignment_from_sample(sample) -> LabelAssignment:
    """The true labels of a :class:`mnarlbm.model.CompleteSample`."""
    return LabelAssignment(sample.row_labels, sample.col_labels)
