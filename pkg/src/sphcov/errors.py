"""Typed exceptions shared by the library and the command line."""
from __future__ import annotations

__all__ = ["SphcovError", "FormatError", "ParameterError", "IndefiniteBlockError",
           "ConvergenceError", "MissingDataError"]


class SphcovError(Exception):
    """Base class for errors this package raises deliberately."""


class FormatError(SphcovError, ValueError):
    """Malformed input file or inconsistent dimensions."""


class ParameterError(SphcovError, ValueError):
    """Parameter values outside their admissible region."""


class IndefiniteBlockError(SphcovError, ArithmeticError):
    """A spectral covariance block failed Cholesky factorization."""

    def __init__(self, frequency: int, message: str | None = None):
        self.frequency = int(frequency)
        super().__init__(message or f"covariance block at frequency {self.frequency} "
                                    "is not positive definite")


class ConvergenceError(SphcovError, RuntimeError):
    """The optimizer hit its iteration budget without meeting the tolerance."""


class MissingDataError(SphcovError, ValueError):
    """The operation needs a complete field; impute first."""
