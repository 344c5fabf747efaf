"""Exception types raised by the public API."""


class VarimpError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(VarimpError):
    """Invalid argument values or malformed input data."""


class SchemaError(ValidationError):
    """Dataset file does not match the expected layout or roles."""


class ZeroVarianceError(ValidationError):
    """The response is constant, so importance scores are undefined."""
