from typing import Optional


class SchemaValidationError(Exception):
    """Raised when a document does not satisfy its JSON Schema.

    :ivar str schema: The schema name
    :ivar str message: The validation message
    :ivar path: JSON path of the offending value, defaults to :const:`None`
    :vartype path: str or None

    """

    def __init__(self, schema: str, message: str, path: Optional[str] = None):
        super().__init__(schema, message, path)
        self.schema = schema
        self.message = message
        self.path = path

    def __str__(self):
        location = f" at '{self.path}'" if self.path else ""
        return (
            f"Document does not satisfy schema '{self.schema}'{location}: "
            f"{self.message}"
        )
