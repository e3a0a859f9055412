"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration violates one of its invariants."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
