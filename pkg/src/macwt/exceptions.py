"""Exception types shared across the package."""


class MacWtError(Exception):
    """Base class for all package errors."""


class ShapeError(MacWtError, ValueError):
    """Array dimensions do not agree with the channel or distribution."""


class CapacityError(MacWtError):
    """An exact enumeration would exceed the support-size guard.

    Carries the offending support size so callers can shrink the blocklength.
    """

    def __init__(self, message, support_size=None):
        super().__init__(message)
        self.support_size = support_size


class ProtocolError(MacWtError):
    """A key-buffer operation was requested that the buffer cannot satisfy."""

    def __init__(self, message, shortfall=0):
        super().__init__(message)
        self.shortfall = shortfall


class ScenarioError(MacWtError, ValueError):
    """Scenario file failed to parse or validate."""
