"""Exception hierarchy shared by every subpackage."""

from pathlib import Path


class PostprocError(Exception):
    """Base class for all package errors."""


class DomainError(PostprocError, ValueError):
    """An argument or parameter lies outside the domain of an operation."""


class QuadratureError(PostprocError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float, requested: float):
        super().__init__(f"{message} (achieved {achieved:.3e}, requested {requested:.3e})")
        self.achieved = achieved
        self.requested = requested


class GridFormatError(PostprocError):
    """A grid or checkpoint file failed validation at a given byte offset."""

    def __init__(self, path: Path | str, offset: int, reason: str):
        super().__init__(f"{path}: byte {offset}: {reason}")
        self.path = Path(path)
        self.offset = offset
        self.reason = reason


class ConfigError(PostprocError):
    """A configuration file violates the schema."""

    def __init__(self, path: Path | str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = Path(path)
        self.line = line
        self.reason = reason


class ReportError(PostprocError):
    """A report could not be written."""
