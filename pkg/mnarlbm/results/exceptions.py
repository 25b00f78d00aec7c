from mnarlbm.schema.exceptions import SchemaValidationError


class ResultError(Exception):
    """Base class for :mod:`mnarlbm.results` errors."""

    pass


class ResultWriteError(ResultError):
    """Raised when a result file cannot be written.

    :ivar str path: The destination path
    :ivar str reason: Why the write failed

    """

    def __init__(self, path: str, reason: str):
        super().__init__(path, reason)
        self.path = path
        self.reason = reason

    def __str__(self):
        return f"Could not write '{self.path}': {self.reason}"


class ResultFormatError(ResultError):
    """Raised when a result document cannot be read back.

    :ivar str what: The kind of document
    :ivar str reason: What is wrong with it

    """

    def __init__(self, what: str, reason: str):
        super().__init__(what, reason)
        self.what = what
        self.reason = reason

    def __str__(self):
        return f"Malformed {self.what} document: {self.reason}"

