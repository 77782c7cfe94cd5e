"""Exception types shared across the toolkit.

Validation failures (bad inputs, malformed files) map to CLI exit code 1,
numerical-health failures to exit code 2.
"""


class PednavError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PednavError):
    """Invalid input data or configuration."""


class NumericalHealthError(PednavError):
    """A numerical invariant was violated (covariance health, conditioning)."""


class DegenerateCalibrationError(ValidationError):
    """Calibration system is rank deficient and inconsistent."""


class FreeFallError(ValidationError):
    """Filtered specific force too small to define a gravity direction."""
