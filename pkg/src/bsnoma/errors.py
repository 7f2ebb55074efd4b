"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a config file fails to parse or validate.

    ``key`` holds the dotted path of the offending entry when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class InfeasibleProblemError(RuntimeError):
    """Raised when no operating point satisfies the constraint set.

    ``constraint`` names the binding constraint (e.g. "C1", "C2", "C5",
    "SIC") so callers can report which requirement failed.
    """

    def __init__(self, message, constraint=None):
        self.constraint = constraint
        if constraint is not None:
            message = f"{constraint}: {message}"
        super().__init__(message)
