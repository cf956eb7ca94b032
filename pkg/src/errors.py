"""
Exceptions raised by the solver library.
"""
from typing import Optional


class BoundViolation(ValueError):
    """A sampled symbol value fell outside its bracket."""

    def __init__(self, xi: float, value: float, lower: Optional[float], upper: Optional[float], name: str = ""):
        self.xi = xi
        self.value = value
        self.lower = lower
        self.upper = upper
        self.name = name
        super().__init__(f"{name or 'bound'} violated at xi={xi!r}: value={value!r}, lower={lower!r}, upper={upper!r}")


class QMismatch(ValueError):
    pass


class DimMismatch(ValueError):
    pass


class GridMismatch(ValueError):
    pass


class SupportOverflow(ValueError):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, message: str, iterations: int):
        self.iterations = iterations
        super().__init__(message)


class SingularA(RuntimeError):
    pass


class NoContraction(RuntimeError):
    """The fixed-point scheme does not contract at this c; raise c."""


class BallExit(NoContraction):
    pass


class NeumannDivergence(NoContraction):
    pass


class InsufficientLadder(RuntimeError):
    pass
