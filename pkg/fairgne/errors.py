"""
Error types raised across the Fair-GNE package.
"""

from typing import Any, Optional


class FairGNEError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(FairGNEError, ValueError):
    """A configuration mapping or file failed validation."""


class InterfaceError(FairGNEError, ValueError):
    """A call violated an interface contract (arity, index range)."""


class LifecycleError(FairGNEError, RuntimeError):
    """An operation was attempted in the wrong lifecycle phase."""


class DomainError(FairGNEError, ValueError):
    """A mathematical function received an argument outside its domain."""


class NumericalError(FairGNEError, ArithmeticError):
    """A value became non-finite."""

    def __init__(self, message: str, state_key: Optional[Any] = None):
        super().__init__(message if state_key is None else f"{message} (state key: {state_key!r})")
        self.state_key = state_key


class CapacityError(FairGNEError, RuntimeError):
    """An enumeration exceeded its configured cap."""


class SuiteParseError(FairGNEError, ValueError):
    """An oracle suite file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ArtifactIOError(FairGNEError, OSError):
    """An output location cannot be written."""
