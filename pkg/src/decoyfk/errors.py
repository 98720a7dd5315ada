"""Exception hierarchy shared by the library and the CLI."""


class DecoyFKError(Exception):
    """Base class for all package errors."""


class DomainError(DecoyFKError, ValueError):
    """An argument lies outside the domain of a function."""


class PreconditionError(DecoyFKError, ValueError):
    """An argument violates a documented precondition of a bound."""


class NumericalFailure(DecoyFKError, ArithmeticError):
    """A root finder failed to reach its tolerance."""


class ValidationError(DecoyFKError, ValueError):
    """A configuration or input record failed validation.

    ``field`` names the offending key when one is known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigParseError(ValidationError):
    """A configuration file line could not be parsed."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class InsufficientCounts(DecoyFKError):
    """A sampling pool is empty, so no phase-error bound exists."""
