"""The :mod:`mnarlbm.metrics` package provides the co-clustering losses, the label
alignment and the recovery diagnostics of fitted models."""
from mnarlbm.metrics.classification import (
    ItemLoss,
    LabelAssignment,
    align_labels,
    expected_random_loss,
    l_item,
    map_assignments,
    random_allocation_loss,
    relabel,
)
from mnarlbm.metrics.recovery import latent_mse, param_max_error

__all__ = [
    "ItemLoss",
    "LabelAssignment",
    "align_labels",
    "expected_random_loss",
    "l_item",
    "latent_mse",
    "map_assignments",
    "param_max_error",
    "random_allocation_loss",
    "relabel",
]
