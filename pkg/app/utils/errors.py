"""Exceptions raised by the analysis services.

Everything derives from ``SparsityError`` so callers (the CLI in particular)
can separate computation failures from programming errors.
"""


class SparsityError(ValueError):
    """Base class for every failure reported by the services."""


class CapExceededError(SparsityError):
    """An enumeration would exceed its configured cap."""


class DomainError(SparsityError):
    """A parameter lies outside the domain of the requested quantity."""


class NotInRangeError(SparsityError):
    """The signal is not in the range of the dictionary."""


class MatrixFormatError(SparsityError):
    """A matrix or vector file could not be parsed."""
