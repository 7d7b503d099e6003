"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Raised when a physical or numerical parameter is out of range."""


class ConfigError(ValueError):
    """Raised when a scenario config file is missing, malformed, or
    contains unknown keys."""


class SimulationError(RuntimeError):
    """Raised when a simulation cannot proceed (bad run request,
    inconsistent state)."""
