"""The :mod:`mnarlbm.selection` package computes the ICL of fitted models and selects
the class counts and missingness kind of a matrix by grid search."""
from mnarlbm.selection.icl import icl, icl_mar, icl_mcar, icl_nmar
from mnarlbm.selection.search import (
    SelectionConfig,
    SelectionEntry,
    SelectionTable,
    select_model,
)

__all__ = [
    "SelectionConfig",
    "SelectionEntry",
    "SelectionTable",
    "icl",
    "icl_mar",
    "icl_mcar",
    "icl_nmar",
    "select_model",
]
