"""Exception types shared across the package."""


class MttFisherError(Exception):
    """Base class for all package-specific errors."""


class ParameterDomainError(MttFisherError, ValueError):
    """A parameter lies outside its valid domain (e.g. non-positive scale)."""


class RestrictedParameterError(MttFisherError, ValueError):
    """Attempt to modify a parameter that a restriction flag keeps fixed."""


class DataError(MttFisherError, ValueError):
    """Malformed observation data (e.g. NaN points)."""


class ModelViolationError(MttFisherError, ValueError):
    """Data incompatible with the requested model regime."""


class ResourceLimitError(MttFisherError, RuntimeError):
    """An exact enumeration would exceed the configured cap."""


class NumericalCollapseError(MttFisherError, ArithmeticError):
    """All Monte Carlo weights vanished; the estimate is undefined."""


class ConfigError(MttFisherError, ValueError):
    """Invalid experiment or estimator configuration."""
