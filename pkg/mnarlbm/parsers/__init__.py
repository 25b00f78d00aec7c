"""Ingestion of observed matrices from CSV files."""
from mnarlbm.parsers.exceptions import (
    EmptyMatrixError,
    MatrixParseError,
    ParserError,
    RaggedRowsError,
    UnsupportedFormatError,
)
from mnarlbm.parsers.matrices import (
    MATRIX_FORMATS,
    TERNARY_CSV,
    VOTES_CSV,
    format_matrix,
    load_matrix,
    save_matrix,
)

__all__ = [
    "EmptyMatrixError",
    "MATRIX_FORMATS",
    "MatrixParseError",
    "ParserError",
    "RaggedRowsError",
    "TERNARY_CSV",
    "UnsupportedFormatError",
    "VOTES_CSV",
    "format_matrix",
    "load_matrix",
    "save_matrix",
]
