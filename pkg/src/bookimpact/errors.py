"""Exception types shared across the package."""


class BookImpactError(Exception):
    """Base class for all package errors."""


class BrokenChain(BookImpactError):
    """Consecutive mid/spread values disagree within a day.

    Raised by the path reconstruction routines; signals an ingest or
    assembly bug, never a statistical problem.
    """


class InvariantViolation(BookImpactError):
    """An event or stream violates a structural invariant."""


class SchemaError(BookImpactError):
    """A CSV file does not match the documented schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonHalfTickGap(BookImpactError):
    """A classified gap is not representable in half-ticks.

    Almost always means the configured tick size is wrong for the file.
    """


class InsufficientData(BookImpactError):
    """Too few samples to estimate the requested quantity."""


class SingularSystem(BookImpactError):
    """The calibration system is singular or numerically unusable.

    Raise the ridge parameter (lambda) to regularize.
    """


class DimensionMismatch(BookImpactError):
    """Inputs do not share the expected lag range or type axes."""


class AlphaOutOfRange(BookImpactError):
    """Spread mean-reversion parameter alpha outside [0, 1)."""


class WindowTooShort(BookImpactError):
    """Forecast history shorter than the kernel lag range."""


class ConfigInvalid(BookImpactError):
    """A generator or ingest configuration fails validation."""
