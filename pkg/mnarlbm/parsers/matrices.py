"""Readers and writers of ternary matrix files.

Two comma-separated formats are supported:

* ``ternary-csv``: one line per row, tokens ``0``, ``1``, ``NA`` or an empty field. A
  first line made only of tokens outside this vocabulary is read as a header of column
  identifiers.
* ``votes-csv``: a header line whose first field names the identifier column and whose
  other fields are the column identifiers, then one line per row starting with the row
  identifier. Tokens are ``for``, ``against``, ``abstained`` and ``absent``; the last
  two both read as missing.

Tokens are matched case-insensitively after stripping surrounding blanks.
"""
import csv
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
from mnarlbm.logging import logger
from mnarlbm.model import CellState, ObservedMatrix
from mnarlbm.parsers.exceptions import (
    EmptyMatrixError,
    MatrixParseError,
    RaggedRowsError,
    UnsupportedFormatError,
)

TERNARY_CSV = "ternary-csv"
VOTES_CSV = "votes-csv"
MATRIX_FORMATS = (TERNARY_CSV, VOTES_CSV)

TERNARY_TOKENS: Dict[str, CellState] = {
    "0": CellState.ZERO,
    "1": CellState.ONE,
    "na": CellState.MISSING,
    "": CellState.MISSING,
}

VOTE_TOKENS: Dict[str, CellState] = {
    "for": CellState.ONE,
    "against": CellState.ZERO,
    "abstained": CellState.MISSING,
    "absent": CellState.MISSING,
}

_TERNARY_NAMES = {CellState.ZERO: "0", CellState.ONE: "1", CellState.MISSING: "NA"}
_VOTE_NAMES = {
    CellState.ZERO: "against",
    CellState.ONE: "for",
    CellState.MISSING: "absent",
}


def _read_lines(path: str) -> List[Tuple[int, List[str]]]:
    # Trailing blank lines are dropped. Any other blank line is a single empty field.
    with open(path, newline="", encoding="utf-8") as f:
        lines = [(n, fields or [""]) for n, fields in enumerate(csv.reader(f), start=1)]

    while lines and lines[-1][1] == [""]:
        lines.pop()

    return lines


def _decode(
    path: str,
    number: int,
    tokens: List[str],
    vocabulary: Dict[str, CellState],
    offset: int = 0,
) -> List[int]:
    row = []

    for j, token in enumerate(tokens, start=1 + offset):
        state = vocabulary.get(token.strip().lower())

        if state is None:
            raise MatrixParseError(path, number, j, token)

        row.append(state.value)

    return row


def _build(
    path: str,
    lines: List[Tuple[int, List[int]]],
    width: int,
    row_ids: Optional[List[str]] = None,
    col_ids: Optional[List[str]] = None,
) -> ObservedMatrix:
    if not lines:
        raise EmptyMatrixError(path)

    for number, row in lines:
        if len(row) != width:
            raise RaggedRowsError(path, number, width, len(row))

    cells = np.array([row for _, row in lines], dtype=np.int8)
    logger.debug(f"Loaded a {cells.shape[0]}x{cells.shape[1]} matrix from '{path}'")

    return ObservedMatrix(cells, row_ids=row_ids, col_ids=col_ids)


def _is_header(tokens: List[str]) -> bool:
    return all(t.strip().lower() not in TERNARY_TOKENS for t in tokens)


def load_ternary_csv(path: str) -> ObservedMatrix:
    """Reads a ``ternary-csv`` file.

    :param str path: The path of the file
    :return: The observed matrix, with column identifiers if the file has a header
    :rtype: ObservedMatrix

    :raises MatrixParseError: A token is outside the vocabulary
    :raises RaggedRowsError: Lines have different numbers of fields
    :raises EmptyMatrixError: The file has no data line
    """
    lines = _read_lines(path)
    col_ids = None

    if lines and _is_header(lines[0][1]):
        col_ids = [t.strip() for t in lines[0][1]]
        lines = lines[1:]

    if not lines:
        raise EmptyMatrixError(path)

    width = len(col_ids) if col_ids is not None else len(lines[0][1])
    decoded = []

    for number, tokens in lines:
        if len(tokens) != width:
            raise RaggedRowsError(path, number, width, len(tokens))

        decoded.append((number, _decode(path, number, tokens, TERNARY_TOKENS)))

    return _build(path, decoded, width, col_ids=col_ids)


def load_votes_csv(path: str) -> ObservedMatrix:
    """Reads a ``votes-csv`` file.

    :param str path: The path of the file
    :return: The observed matrix, with row and column identifiers
    :rtype: ObservedMatrix

    :raises MatrixParseError: A vote is outside the vocabulary
    :raises RaggedRowsError: Lines have different numbers of fields
    :raises EmptyMatrixError: The file has no data line
    """
    lines = _read_lines(path)

    if len(lines) < 2:
        raise EmptyMatrixError(path)

    _, header = lines[0]
    col_ids = [t.strip() for t in header[1:]]
    width = len(header)
    row_ids = []
    decoded = []

    for number, fields in lines[1:]:
        if len(fields) != width:
            raise RaggedRowsError(path, number, width, len(fields))

        row_ids.append(fields[0].strip())
        decoded.append((number, _decode(path, number, fields[1:], VOTE_TOKENS, 1)))

    if not col_ids:
        raise EmptyMatrixError(path)

    return _build(path, decoded, width - 1, row_ids=row_ids, col_ids=col_ids)


def load_matrix(path: str, matrix_format: str = TERNARY_CSV) -> ObservedMatrix:
    """Reads an observed matrix from a file.

    :param str path: The path of the file
    :param str matrix_format: One of :const:`MATRIX_FORMATS`, defaults to
      ``ternary-csv``
    :return: The observed matrix
    :rtype: ObservedMatrix

    :raises UnsupportedFormatError: `matrix_format` is unknown
    :raises ParserError: The file cannot be fully interpreted
    """
    if matrix_format == TERNARY_CSV:
        return load_ternary_csv(path)
    elif matrix_format == VOTES_CSV:
        return load_votes_csv(path)

    raise UnsupportedFormatError(matrix_format)


def _default_ids(prefix: str, ids: Optional[Tuple[str, ...]], n: int) -> List[str]:
    return list(ids) if ids is not None else [f"{prefix}{i + 1}" for i in range(n)]


def format_matrix(
    x: ObservedMatrix, matrix_format: str = TERNARY_CSV
) -> List[List[str]]:
    """The lines of the file that :func:`save_matrix` writes.

    ``ternary-csv`` lines never carry a header; ``votes-csv`` lines use the identifiers
    of `x`, or ``r1, r2, ...`` and ``c1, c2, ...`` when it has none.
    """
    if matrix_format == TERNARY_CSV:
        names = _TERNARY_NAMES
    elif matrix_format == VOTES_CSV:
        names = _VOTE_NAMES
    else:
        raise UnsupportedFormatError(matrix_format)

    body = [[names[CellState(int(c))] for c in row] for row in x.cells]

    if matrix_format == TERNARY_CSV:
        return body

    row_ids = _default_ids("r", x.row_ids, x.n_rows)
    header = ["id"] + _default_ids("c", x.col_ids, x.n_cols)

    return [header] + [[rid] + row for rid, row in zip(row_ids, body)]


def save_matrix(x: ObservedMatrix, path: str, matrix_format: str = TERNARY_CSV):
    """Writes an observed matrix so that :func:`load_matrix` reads it back unchanged.

    :param ObservedMatrix x: The matrix to write
    :param str path: The destination path
    :param str matrix_format: One of :const:`MATRIX_FORMATS`, defaults to
      ``ternary-csv``
    """
    lines = format_matrix(x, matrix_format)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    with open(path, "w", newline="", encoding="utf-8") as f:
        csv.writer(f, lineterminator="\n").writerows(lines)
