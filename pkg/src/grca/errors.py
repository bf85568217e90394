"""
Exceptions raised by grca.
"""

from typing import Optional, Tuple


class GrcaError(Exception):
    """Base class for every error raised by grca."""


class DimensionError(GrcaError, ValueError):
    """Shapes of cubes, endmembers, bases or fields do not agree."""


class DomainError(GrcaError, ValueError):
    """A value lies outside its admissible domain."""


class RankDeficiencyError(GrcaError, ValueError):
    """An endmember matrix does not have full column rank."""


class ConfigError(GrcaError, ValueError):
    """A run configuration is missing a section or holds a bad value."""


class FormatError(GrcaError, ValueError):
    """A file on disk does not follow the expected layout."""


class SingularSystemError(GrcaError, ArithmeticError):
    """A precision matrix could not be factorised."""

    def __init__(self, message: str, pixel: Optional[Tuple[int, int]] = None):
        if pixel is not None:
            message = f"{message} (pixel {pixel})"
        super().__init__(message)
        self.pixel = pixel


class ChainAbortedError(GrcaError, RuntimeError):
    """The sampler failed; `iteration` is the iteration that failed."""

    def __init__(self, iteration: int, cause: BaseException):
        super().__init__(f"Chain aborted at iteration {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause
