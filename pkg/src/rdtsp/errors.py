class RdtspError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(RdtspError, ValueError):
    """Input data violates a structural invariant."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class GuardError(RdtspError):
    """A solver refused an input that exceeds its size guard."""

    def __init__(self, message, guard=None, limit=None, value=None):
        super().__init__(message)
        self.guard = guard
        self.limit = limit
        self.value = value
