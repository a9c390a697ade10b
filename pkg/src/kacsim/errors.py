"""Exception types shared across the package."""


class KacsimError(Exception):
    """Base class for package errors."""


class DomainError(KacsimError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigError(KacsimError, ValueError):
    """A simulation or experiment configuration is invalid."""
