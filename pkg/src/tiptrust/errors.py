"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: data problems (``DataError`` and its
subclasses) exit with 2, numeric failures with 3.
"""


class TipError(Exception):
    """Base class for all package errors."""


class MisuseError(TipError, ValueError):
    """An operation was called outside its precondition."""


class DataError(TipError, ValueError):
    """Invalid input data or configuration."""


class DomainError(DataError):
    """A value lies outside the mathematical domain of an operation."""


class ParseError(DataError):
    """A dataset file violates the CSV schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(DataError):
    """A parameter or configuration document is malformed."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class NumericError(TipError, ArithmeticError):
    """A numeric routine produced a non-finite value or failed to converge."""


class NoEquilibriumError(NumericError):
    """No root of the equilibrium system was located in the unit square."""
