"""
Exception hierarchy for fairalloc.

Every error raised on purpose by the library derives from FairAllocError so the
CLI can map it to exit status 2 with a one-line message.
"""


class FairAllocError(Exception):
    """Base class for all deliberate fairalloc failures."""


class InstanceFormatError(FairAllocError, ValueError):
    """An instance, allocation or CNF document could not be parsed or validated."""


class PreconditionError(FairAllocError, ValueError):
    """A solver or strategy was applied outside the preference class it supports."""


class ShapeError(FairAllocError, ValueError):
    """A house allocation was requested with more agents than resources."""


class BudgetExceededError(FairAllocError, RuntimeError):
    """A search would exceed its leaf or node budget; the solver refuses instead of truncating."""


class SolverDisagreementError(FairAllocError, RuntimeError):
    """A specialized solver and the exact oracle disagree on the same instance."""
