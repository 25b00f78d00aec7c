"""Serialization and writing of result files."""
from mnarlbm.results.exceptions import (
    ResultError,
    ResultFormatError,
    ResultWriteError,
    SchemaValidationError,
)
from mnarlbm.results.serialization import (
    GroundTruth,
    RunManifest,
    file_digest,
    fit_from_dict,
    fit_to_dict,
    truth_from_dict,
    truth_to_dict,
)
from mnarlbm.results.writer import FAILURE_FILE, ResultWriter

__all__ = [
    "FAILURE_FILE",
    "GroundTruth",
    "ResultError",
    "ResultFormatError",
    "ResultWriteError",
    "ResultWriter",
    "RunManifest",
    "SchemaValidationError",
    "file_digest",
    "fit_from_dict",
    "fit_to_dict",
    "truth_from_dict",
    "truth_to_dict",
]
