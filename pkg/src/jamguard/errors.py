"""Exception types shared across the package."""


class JamguardError(Exception):
    """Base class for all package-specific errors."""


class DataError(JamguardError):
    """Malformed input data: bad CSV rows, schema violations, invalid configs."""


class TrainingError(JamguardError):
    """A model could not be trained (degenerate data, diverging optimizer)."""
