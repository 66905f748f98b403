"""Exception hierarchy shared across the package."""


class QReflectError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QReflectError, ValueError):
    """Invalid physical or numerical configuration (CLI exit code 1)."""


class PropagationError(QReflectError, RuntimeError):
    """Log-derivative propagation failed (CLI exit code 2)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class MatchingError(QReflectError, RuntimeError):
    """Asymptotic matching of the reflection matrix failed (CLI exit code 2)."""
