"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad keys, malformed values, incompatible options."""


class ConvergenceError(RuntimeError):
    """A numerical routine failed to converge or a numeric precondition broke."""


class GapConditionError(ConvergenceError):
    """The two leading population eigenvalues are degenerate; centering is undefined."""
