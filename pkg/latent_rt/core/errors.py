"""
Exception hierarchy shared by every service module.
"""
from typing import Optional, Sequence


class LatentRTError(Exception):
    """Base class for all errors raised by the package."""


class ConfigurationError(LatentRTError, ValueError):
    """Dimensions, designs or run settings that do not fit together."""


class InvalidParameterError(LatentRTError, ValueError):
    """Parameter values outside the model's domain."""


class DegenerateConditioningError(LatentRTError, ArithmeticError):
    """
    The crossing event has (numerically) zero variance, so the Joe correction
    cannot be formed. Cell coordinates are attached when known.
    """

    def __init__(self, message: str, subject: Optional[int] = None,
                 time_index: Optional[int] = None, outcome: Optional[int] = None):
        self.reason = message
        self.subject = subject
        self.time_index = time_index
        self.outcome = outcome
        where = []
        if subject is not None:
            where.append(f"subject={subject}")
        if time_index is not None:
            where.append(f"time_index={time_index}")
        if outcome is not None:
            where.append(f"outcome={outcome}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)

    def at(self, subject: Optional[int] = None, time_index: Optional[int] = None,
           outcome: Optional[int] = None) -> "DegenerateConditioningError":
        """Returns a copy with (more) cell coordinates filled in."""
        return DegenerateConditioningError(
            self.reason,
            subject=self.subject if subject is None else subject,
            time_index=self.time_index if time_index is None else time_index,
            outcome=self.outcome if outcome is None else outcome,
        )


class NumericalFailureError(LatentRTError, ArithmeticError):
    """A likelihood term evaluated to a non-finite value."""

    def __init__(self, message: str, subject: Optional[int] = None):
        self.subject = subject
        super().__init__(message if subject is None else f"{message} (subject={subject})")


class InsufficientSamplesError(LatentRTError):
    """A Monte-Carlo oracle kept too few samples after conditioning."""


class DataFormatError(LatentRTError, ValueError):
    """A data file that does not follow the CSV format."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class OptimizationError(LatentRTError):
    """The objective could not be evaluated where the optimizer needs it."""

    def __init__(self, message: str, theta: Optional[Sequence[float]] = None):
        self.theta = None if theta is None else [float(t) for t in theta]
        suffix = "" if self.theta is None else f" at theta={self.theta}"
        super().__init__(message + suffix)


class RankDeficientDesignWarning(UserWarning):
    """Least squares for a starting value met a rank-deficient design."""
