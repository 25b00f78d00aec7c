class ParserError(Exception):
    """Base class for :mod:`mnarlbm.parsers` errors."""

    pass


class MatrixParseError(ParserError):
    """Raised when a matrix file holds a token outside its vocabulary.

    :ivar str path: The path of the file
    :ivar int row: The 1-based line of the token
    :ivar int col: The 1-based field of the token
    :ivar str token: The offending token

    """

    def __init__(self, path: str, row: int, col: int, token: str):
        super().__init__(path, row, col, token)
        self.path = path
        self.row = row
        self.col = col
        self.token = token

    def __str__(self):
        return (
            f"Unknown token {self.token!r} in '{self.path}' at line {self.row}, "
            f"field {self.col}"
        )


class RaggedRowsError(ParserError):
    """Raised when the lines of a matrix file have different numbers of fields.

    :ivar str path: The path of the file
    :ivar int row: The 1-based line of the offending row
    :ivar int expected: The number of fields of the first row
    :ivar int actual: The number of fields of the offending row

    """

    def __init__(self, path: str, row: int, expected: int, actual: int):
        super().__init__(path, row, expected, actual)
        self.path = path
        self.row = row
        self.expected = expected
        self.actual = actual

    def __str__(self):
        return (
            f"Line {self.row} of '{self.path}' has {self.actual} fields, expected "
            f"{self.expected}"
        )


class UnsupportedFormatError(ParserError):
    """Raised when a matrix format is unknown.

    :ivar str matrix_format: The requested format

    """

    def __init__(self, matrix_format: str):
        super().__init__(matrix_format)
        self.matrix_format = matrix_format

    def __str__(self):
        return f"Unsupported matrix format '{self.matrix_format}'"


class EmptyMatrixError(ParserError):
    """Raised when a matrix file holds no data row.

    :ivar str path: The path of the file

    """

    def __init__(self, path: str):
        super().__init__(path)
        self.path = path

    def __str__(self):
        return f"No data row in '{self.path}'"
