from mnarlbm.model.exceptions import ContractError


class SelectionError(Exception):
    """Base class for :mod:`mnarlbm.selection` errors."""

    pass


class KindMismatchError(SelectionError, ContractError):
    """Raised when an ICL formula is applied to a fit of another missingness kind.

    :ivar str expected: The kind required by the formula
    :ivar str actual: The kind of the fit

    """

    def __init__(self, expected: str, actual: str):
        super().__init__(f"expected a {expected} fit, got {actual}")
        self.args = (expected, actual)
        self.expected = expected
        self.actual = actual

    def __str__(self):
        return f"ICL formula for {self.expected} fits applied to a {self.actual} fit"


class AllFitsFailedError(SelectionError):
    """Raised when no cell of the selection grid could be fitted.

    :ivar int n_cells: The number of grid cells
    :ivar str first_error: The error message of the first cell

    """

    def __init__(self, n_cells: int, first_error: str):
        super().__init__(n_cells, first_error)
        self.n_cells = n_cells
        self.first_error = first_error

    def __str__(self):
        return (
            f"All {self.n_cells} fits of the selection grid failed, first error: "
            f"{self.first_error}"
        )
