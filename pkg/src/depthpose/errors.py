"""Exception types shared across the package.

ValidationError maps to CLI exit code 2, NumericError to exit code 3.
"""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class NumericError(RuntimeError):
    """Raised when a computation produces non-finite values."""
