"""Exception types shared across the package."""


class DispersimError(Exception):
    """Base class for all package errors."""


class MapError(DispersimError):
    """Base class for environment parsing errors."""


class UnknownCharacterError(MapError):
    pass


class NoSourceError(MapError):
    pass


class DisconnectedError(MapError):
    pass


class EdgeOutOfRangeError(MapError):
    pass


class TruncationExceededError(DispersimError):
    """A robot or particle index beyond the configured truncation was needed."""


class CapacityViolationError(DispersimError):
    """Internal assertion: more than one settled or mobile robot on a vertex."""


class SyncConflictError(DispersimError):
    """Two robots attempted the same vertex within one synchronous step."""


class ScriptBudgetViolationError(DispersimError):
    """A scripted crash schedule demands more crashes than the budget allows."""


class InsufficientSamplesError(DispersimError):
    """Not enough (or degenerate) data for a statistical estimate."""


class VertexOverflowError(DispersimError):
    """Internal: a lazily materialized path ran past its array capacity."""
