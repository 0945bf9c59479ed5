"""Exception types shared across the toolkit."""


class MultiSLEError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(MultiSLEError, ValueError):
    """A scalar parameter is out of its admissible range."""


class InvalidConfigError(MultiSLEError, ValueError):
    """A boundary configuration violates the strict-ordering requirement."""


class InvalidInputError(MultiSLEError, ValueError):
    """Malformed structured input (curves, driving series, sample sets)."""


class StepTooLargeError(MultiSLEError, ValueError):
    """A finite-difference step is too large for the point separation."""
