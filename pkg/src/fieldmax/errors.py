"""Exception hierarchy shared by all modules."""


class FieldmaxError(Exception):
    """Base class for user-facing errors (CLI exit code 1)."""


class DomainError(FieldmaxError, ValueError):
    """An argument lies outside the domain of the operation."""


class SizeError(FieldmaxError):
    """A configured size cap (sites, pairs) would be exceeded."""


class ModelError(FieldmaxError):
    """A correlation model is invalid for the requested use."""


class EmbeddingError(ModelError):
    """Circulant embedding produced a spectrum that is not nonnegative."""


class CalibrationError(FieldmaxError):
    """A level calibration root solve failed to bracket."""


class ConfigError(FieldmaxError):
    """Invalid experiment configuration or missing model attribute."""


class InvariantViolation(AssertionError):
    """An internal invariant failed (CLI exit code 2)."""
