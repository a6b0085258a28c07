"""Exception hierarchy shared by all modules."""


class NessRateError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(NessRateError, ValueError):
    """Operands live on incompatible spaces or have inconsistent shapes."""


class ValidationError(NessRateError, ValueError):
    """An input violates a documented precondition."""


class PartitionError(ValidationError):
    """A set of projectors does not form a valid partition."""


class SteadyStateError(NessRateError):
    """The Liouvillian has no unique, physical steady state."""


class RateError(NessRateError):
    """A rate could not be computed or failed its consistency checks."""


class DynamicsError(NessRateError):
    """Propagation or trajectory post-processing failed."""


class ConfigError(NessRateError, ValueError):
    """A run configuration is malformed."""
