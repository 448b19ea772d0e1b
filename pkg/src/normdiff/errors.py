class CapacityError(ValueError):
    """An input exceeds an enumeration or state-space bound."""


class ReducibleChainError(ValueError):
    """A stationary distribution was requested for a reducible chain."""

    def __init__(self, message, closed_classes=()):
        super().__init__(message)
        self.closed_classes = list(closed_classes)


class CensoredError(RuntimeError):
    """Every Monte-Carlo replica hit its step budget."""
