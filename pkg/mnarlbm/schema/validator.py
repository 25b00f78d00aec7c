"""Validation of result documents against the JSON Schemas of this package.

Every schema lives next to this module as :file:`<name>.schema.json`. Schemas refer to
the shared definitions of :file:`common.schema.json` by relative reference, which are
resolved from an in-memory store.
"""
import functools
import json
import os
from typing import Any, Dict

from jsonschema import Draft7Validator
from jsonschema.exceptions import SchemaError, best_match
from jsonschema.validators import RefResolver
from mnarlbm.schema.exceptions import SchemaValidationError

SCHEMA_DIR = os.path.dirname(__file__)

SCHEMA_NAMES = (
    "common",
    "eval",
    "experiment",
    "failure",
    "fit-result",
    "report",
    "risk",
    "selection",
    "truth",
)


def schema_path(name: str) -> str:
    return os.path.join(SCHEMA_DIR, f"{name}.schema.json")


@functools.lru_cache(maxsize=None)
def load_schema(name: str) -> Dict[str, Any]:
    """Loads the schema `name`, such as ``fit-result``.

    :raises SchemaValidationError: No such schema
    """
    if name not in SCHEMA_NAMES:
        raise SchemaValidationError(name, "unknown schema")

    with open(schema_path(name)) as f:
        return json.load(f)


@functools.lru_cache(maxsize=None)
def get_validator(name: str) -> Draft7Validator:
    schema = load_schema(name)

    try:
        Draft7Validator.check_schema(schema)
    except SchemaError as e:
        raise SchemaValidationError(name, f"invalid schema: {e.message}") from None

    store = {load_schema(n)["$id"]: load_schema(n) for n in SCHEMA_NAMES}
    resolver = RefResolver.from_schema(schema, store=store)

    return Draft7Validator(schema, resolver=resolver)


def validate(document: Dict[str, Any], name: str) -> None:
    """Checks `document` against the schema `name`.

    The most relevant error, as ranked by :func:`jsonschema.exceptions.best_match`,
    is reported.

    :param document: The document to check
    :type document: dict[str, Any]
    :param str name: The schema name, one of :const:`SCHEMA_NAMES`

    :raises SchemaValidationError: The document does not satisfy the schema
    """
    validator = get_validator(name)
    error = best_match(validator.iter_errors(document))

    if error is not None:
        path = "/".join(str(p) for p in error.absolute_path) or None
        raise SchemaValidationError(name, error.message, path)
