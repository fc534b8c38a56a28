"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: config errors exit 2, data errors
exit 3, numerical aborts exit 4.
"""


class FreqFieldError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FreqFieldError):
    """An operation received arguments violating its preconditions."""


class InvalidConfigError(FreqFieldError):
    """A configuration document or object is malformed."""


class DataError(FreqFieldError):
    """Dataset files are missing, truncated, or inconsistent."""


class NumericalAbortError(FreqFieldError):
    """Training produced a non-finite loss and was stopped."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
