"""Exception types shared across the package."""
from __future__ import annotations


class InvalidInput(ValueError):
    """An argument violates an operation's contract (shape, emptiness, range)."""


class InvalidIndex(InvalidInput):
    """A column index is out of range or an index set is malformed."""


class DomainError(ValueError):
    """A numeric argument lies outside the mathematical domain of a formula."""


class BudgetExceeded(RuntimeError):
    """An exact enumeration would exceed the configured combinatorial budget."""


class FormatError(ValueError):
    """A file does not parse as the expected on-disk format."""
