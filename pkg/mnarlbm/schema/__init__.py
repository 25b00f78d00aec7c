"""JSON Schemas of the result documents."""
from mnarlbm.schema import validator
from mnarlbm.schema.validator import SCHEMA_NAMES, load_schema, validate

__all__ = ["SCHEMA_NAMES", "load_schema", "validate", "validator"]
