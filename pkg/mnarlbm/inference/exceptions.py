from mnarlbm.model.exceptions import ContractError


class InferenceError(Exception):
    """Base class for :mod:`mnarlbm.inference` errors."""

    pass


class DegenerateMatrixError(InferenceError):
    """Raised when a spectral initialization is requested on a matrix without any
    observed cell.

    :ivar shape: Shape of the matrix
    :vartype shape: tuple[int, int]

    """

    def __init__(self, shape):
        super().__init__(shape)
        self.shape = tuple(shape)

    def __str__(self):
        return f"Matrix of shape {self.shape} has no observed cell"


class ClassCountError(InferenceError, ContractError):
    """Raised when a requested number of classes exceeds the matching dimension.

    :ivar str dimension: Either ``rows`` or ``columns``
    :ivar int n_classes: The requested number of classes
    :ivar int size: The size of the dimension

    """

    def __init__(self, dimension: str, n_classes: int, size: int):
        super().__init__(
            f"{n_classes} {dimension} classes requested for {size} {dimension}"
        )
        self.args = (dimension, n_classes, size)
        self.dimension = dimension
        self.n_classes = n_classes
        self.size = size

    def __str__(self):
        return (
            f"Cannot fit {self.n_classes} {self.dimension} classes on "
            f"{self.size} {self.dimension}"
        )
