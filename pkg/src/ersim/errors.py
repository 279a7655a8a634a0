"""Exception types raised across the toolkit.

The CLI maps each family onto an exit status: configuration problems exit 2,
numerical failures exit 3 and I/O failures exit 4.
"""


class ErsimError(Exception):
    """Base class for all toolkit errors."""

    category = "error"


class InvalidConfigError(ErsimError, ValueError):
    category = "config"


class UnsupportedTransitionError(ErsimError, ValueError):
    category = "config"


class InvalidStateError(ErsimError, ValueError):
    category = "config"


class DomainError(ErsimError, ValueError):
    category = "config"


class NumericalError(ErsimError, RuntimeError):
    """Integrator or solver failed to meet its tolerance."""

    category = "numerical"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitError(NumericalError):
    """A fit did not converge; ``diagnostics`` carries the residual report."""


class InsufficientDataError(ErsimError, ValueError):
    category = "config"


class UnidentifiableParameterError(FitError):
    pass


class DataFormatError(ErsimError, ValueError):
    """An input file is unreadable or does not have the expected columns."""

    category = "io"
