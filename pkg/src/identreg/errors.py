"""Exception types.

Validation errors signal bad input (CLI exit code 2). Numerical errors
signal that a computation could not be completed (CLI exit code 1).
"""


class IdentregError(Exception):
    pass


class ValidationError(IdentregError, ValueError):
    pass


class NumericalError(IdentregError, ArithmeticError):
    pass


class NotSymmetric(ValidationError):
    pass


class NotPsd(ValidationError):
    pass


class ZeroMatrix(ValidationError):
    pass


class IncompatibleSubspaces(ValidationError):
    pass


class ZeroVector(ValidationError):
    pass


class NotInRange(ValidationError):
    pass


class EmptyData(ValidationError):
    pass


class BadMomentOrder(ValidationError):
    pass


class ConfigInvalid(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class UnsupportedBranch(ValidationError):
    pass


class ZeroReference(ValidationError):
    pass


class DegenerateLevel(NumericalError):
    pass


class NoIdentifiableLevel(NumericalError):
    pass


class DofNotAttained(NumericalError):
    pass


class DegenerateProjection(NumericalError):
    pass


class NotInterpretable(NumericalError):
    pass


class ThresholdViolated(NumericalError):
    pass
