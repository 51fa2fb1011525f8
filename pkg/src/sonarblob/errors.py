"""Exception types shared across the package."""


class SonarBlobError(Exception):
    """Base class for all package errors."""


class ParameterError(SonarBlobError, ValueError):
    """Invalid argument or configuration value."""


class NumericalError(SonarBlobError, ArithmeticError):
    """A numerical routine failed (e.g. eigensolver did not converge)."""
