"""Exception types shared across the toolkit."""


class GaitkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GaitkitError, ValueError):
    """A configuration value is outside its documented range or malformed."""


class UnknownGaitError(GaitkitError, KeyError):
    """Requested gait name is not in the library."""


class NumericalDivergenceError(GaitkitError, RuntimeError):
    """A state became non-finite (NaN/inf) during integration."""


class SchemaVersionError(GaitkitError, ValueError):
    """A data file or message declares an unsupported schema version."""
