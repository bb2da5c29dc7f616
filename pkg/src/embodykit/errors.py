"""Exception types shared across the toolkit."""


class EmbodykitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(EmbodykitError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(EmbodykitError, ValueError):
    """An experiment or scene configuration is malformed."""


class DegenerateTargetError(InvalidInputError):
    """A control target coincides with the controlled site."""
