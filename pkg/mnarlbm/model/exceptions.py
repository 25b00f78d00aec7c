from typing import Any, Tuple


class ModelError(Exception):
    """Base class for :mod:`mnarlbm.model` errors."""

    pass


class DomainError(ModelError, ValueError):
    """Raised when a value lies outside the domain of an operation.

    :ivar str name: The name of the offending argument
    :ivar value: The offending value
    :ivar str domain: A description of the admissible domain

    """

    def __init__(self, name: str, value: Any, domain: str):
        super().__init__(name, value, domain)
        self.name = name
        self.value = value
        self.domain = domain

    def __str__(self):
        return f"'{self.name}' must lie in {self.domain}, got {self.value!r}"


class ContractError(ModelError, ValueError):
    """Raised when the inputs of an operation are mutually inconsistent.

    :ivar str message: A description of the broken contract

    """

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self):
        return self.message


class DimensionMismatchError(ContractError):
    """Raised when two objects disagree on a dimension.

    :ivar str what: The dimension being compared
    :ivar expected: The expected shape
    :vartype expected: tuple[int, ...]
    :ivar actual: The actual shape
    :vartype actual: tuple[int, ...]

    """

    def __init__(self, what: str, expected: Tuple[int, ...], actual: Tuple[int, ...]):
        super().__init__(
            f"dimension mismatch on {what}: expected {tuple(expected)}, got "
            f"{tuple(actual)}"
        )
        self.args = (what, expected, actual)
        self.what = what
        self.expected = tuple(expected)
        self.actual = tuple(actual)
