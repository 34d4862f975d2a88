"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration document or parameter set violates its constraints."""


class NumericalError(RuntimeError):
    """A linear-algebra routine could not produce a trustworthy result."""


class InsufficientDataError(ValueError):
    """Not enough observation windows for the requested estimate."""
