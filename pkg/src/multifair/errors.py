"""Shared exception types.

Every error raised on purpose by this package derives from MultifairError so
callers (and the CLI) can separate expected failures from genuine bugs.
"""


class MultifairError(Exception):
    """Base class for all package errors."""


class ConfigError(MultifairError):
    """A space, manifest, or option document is malformed."""


class DataError(MultifairError):
    """A dataset violates its schema or a data-level precondition."""


class GridCapError(ConfigError):
    """Full enumeration was requested for a grid above the safety cap."""


class MetricUndefinedError(MultifairError):
    """A metric's preconditions do not hold for the given inputs."""


class AnalysisError(MultifairError):
    """An analysis step (importance, stability, agreement) cannot proceed."""


class IncompleteGridError(AnalysisError):
    """Exact variance decomposition needs one row per grid cell."""
