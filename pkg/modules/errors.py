"""
Exception hierarchy shared by the lab modules.

Core numerical operations raise these; the orchestration layers (experiments and
the command line) catch them, log them and record the failure in the report.
"""

from typing import Any, List, Optional, Tuple


class LabError(ValueError):
    """Base class for every error raised by the lab."""


class InvalidInputError(LabError):
    """An argument is outside the documented domain of an operation."""


class GridMismatchError(LabError):
    """Two objects that must live on the same grid do not."""

    def __init__(self, expected: Any, found: Any):
        self.expected = expected
        self.found = found
        super().__init__(f"Grid mismatch: expected {expected}, found {found}")


class SizeLimitError(LabError):
    """A grid or enumeration exceeds the size an exact method supports."""

    def __init__(self, what: str, size: int, limit: int):
        self.what = what
        self.size = size
        self.limit = limit
        super().__init__(f"{what} size {size} exceeds limit {limit}")


class NonFiniteValueError(LabError):
    """An integrand returned NaN or Inf.

    The offending argument (for example ``(s, t)`` or ``(x, xi)``) is kept in
    ``witness`` so callers can report it.
    """

    def __init__(self, name: str, witness: Optional[Tuple[Any, ...]] = None):
        self.name = name
        self.witness = witness
        super().__init__(f"{name} returned a non-finite value at {witness}")


class ConfigValidationError(LabError):
    """A run configuration failed schema validation."""

    def __init__(self, problems: List[Tuple[str, str]]):
        self.problems = list(problems)
        details = "; ".join(f"{pointer or '/'}: {message}" for pointer, message in self.problems)
        super().__init__(f"Invalid configuration: {details}")
