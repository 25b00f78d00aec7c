from typing import Optional


class SimulationError(Exception):
    """Base class for :mod:`mnarlbm.simulation` errors."""

    pass


class CalibrationError(SimulationError):
    """Raised when the target risk cannot be reached inside the calibration bracket.

    :ivar float target: The requested conditional Bayes risk
    :ivar float low: Lower end of the :math:`\\epsilon` bracket
    :ivar float high: Upper end of the :math:`\\epsilon` bracket
    :ivar risk_low: Median risk measured at `low`, if measured
    :vartype risk_low: float or None
    :ivar risk_high: Median risk measured at `high`, if measured
    :vartype risk_high: float or None

    """

    def __init__(
        self,
        target: float,
        low: float,
        high: float,
        risk_low: Optional[float] = None,
        risk_high: Optional[float] = None,
    ):
        super().__init__(target, low, high, risk_low, risk_high)
        self.target = target
        self.low = low
        self.high = high
        self.risk_low = risk_low
        self.risk_high = risk_high

    def __str__(self):
        measured = (
            ""
            if self.risk_low is None
            else f" (risks {self.risk_low:.4f} and {self.risk_high:.4f})"
        )
        return (
            f"Target risk {self.target!r} is unreachable for epsilon in "
            f"[{self.low}, {self.high}]{measured}"
        )


class EnumerationError(SimulationError):
    """Raised when the exact posterior enumeration is not admissible.

    :ivar str reason: Why the enumeration was refused

    """

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason

    def __str__(self):
        return f"Exact enumeration refused: {self.reason}"
