class ValidationError(ValueError):
    """Input structure violates an invariant of its type."""


class BoundExceeded(ValueError):
    """An exhaustive routine was asked for a size beyond its configured bound."""


class TreeTooLarge(RuntimeError):
    """A Galton-Watson draw exceeded the caller's edge cap."""
