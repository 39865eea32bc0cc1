"""Exception taxonomy shared across the package.

The CLI maps these onto stable exit codes: validation and format problems
exit with 2, numerical failures with 3, and plain I/O errors with 1.
"""


class HFTTError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(HFTTError, ValueError):
    """Inputs, configuration, or metadata violate a documented contract."""


class FormatError(ValidationError):
    """A container file is not in the expected binary layout."""


class CorruptionError(FormatError):
    """A container parses structurally but its payload is inconsistent."""


class NumericalError(HFTTError, ArithmeticError):
    """A computation produced degenerate or non-finite values."""


class ConvergenceWarning(RuntimeWarning):
    """An iterative fit stalled before meeting its convergence target."""
