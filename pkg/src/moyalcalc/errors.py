"""Exception hierarchy shared by every module."""


class MoyalError(Exception):
    """Base class for all library errors."""


class ValidationError(MoyalError, ValueError):
    """Malformed input: wrong shapes, broken invariants, bad parameters."""


class CapabilityError(MoyalError):
    """The requested computation has no implemented path for these inputs."""


class NumericalError(MoyalError, ArithmeticError):
    """A numerical routine failed or produced an untrustworthy result."""


class SupportWarning(UserWarning):
    """A symbol is not negligible outside the inner half of its box."""
